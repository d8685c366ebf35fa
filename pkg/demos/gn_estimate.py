"""Lower estimates of the Gagliardo-Nirenberg constant on several graphs.

The ratio ||f||_6 / (||f'||^{1/3} ||f||_2^{2/3}) is maximized over a family of
trial functions. On the line the sharp value is (2/pi)^{1/3}; graphs that
contain a line-like path cannot do worse, and graphs with a bounded or
half-infinite piece can do strictly better.
"""

# %%
from graphnls import figure_one_graph, gn_constant_lower_bound, half_line, line, star, tadpole
from graphnls.soliton import K62_LINE

print(f"line sharp constant (2/pi)^(1/3) = {K62_LINE:.6f}")
graphs = {
    "line": line(),
    "half-line": half_line(),
    "3-star": star(3),
    "tadpole": tadpole(),
    "figure-one": figure_one_graph(),
}

# %%
for name, g in graphs.items():
    print(f"{name:<11} {gn_constant_lower_bound(g, 6, 2):.6f}")
