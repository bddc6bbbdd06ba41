"""Formula strings attached to every serialized certificate."""

ANCHORS = {
    "flatness": "|U(x) - f <x, e>^+| <= eps",
    "vanish": "|U| = 0 in B_1 ∩ {<x, e> < -eps}",
    "smallness": "|u^i| <= C eps (x_n + eps)^+ in B_{3/4}",
    "viscosity": (
        "|grad phi|(x0) > 1: <U, f> not touched by below; "
        "|grad phi|(x0) < 1: |U| not touched by above"
    ),
    "fb_gradient": "|grad |U|| = 1 on F(U)",
    "harnack_step": "b_1 - a_1 = (1 - c)(b_0 - a_0) in B_{r/20}(x_0)",
    "harnack_cascade": "rho_k = 20^{-k}, (1 - c)^k = 20^{-alpha k}",
    "improvement": "|U - f_bar <x, nu>^+| <= eps r / 2 in B_r",
    "barrier": "w = (|x - xbar|^gamma - (3/4)^gamma) / ((1/20)^gamma - (3/4)^gamma)",
    "comparison": "v_t = p + c0 eps (w - 1) + t ; v_t = p + eps - c0 eps (w - 1) - t",
    "energy": "int |grad U|^2 + |{|U| > 0}|",
    "linearized": "Delta u = 0, d_n u^1 = 0, u^i = 0 (i >= 2) on {x_n = 0}",
}
