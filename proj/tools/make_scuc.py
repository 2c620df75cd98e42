#!/usr/bin/env python3
"""Write the bundled SCUC-like LP (relaxed unit commitment with line limits).

usage: make_scuc.py OUT.lp [--gens 8] [--periods 12] [--lines 20] [--seed 5]
"""
import argparse
import random


def fmt(v):
    v = round(v, 2)
    return str(int(v)) if v == int(v) else repr(v)


def terms(pairs):
    out = []
    for k, (coef, name) in enumerate(pairs):
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = name if mag == 1 else f"{fmt(mag)} {name}"
        if k == 0:
            out.append(("-" if coef < 0 else "") + body)
        else:
            out.append(f"{sign} {body}")
    return " ".join(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--gens", type=int, default=8)
    ap.add_argument("--periods", type=int, default=12)
    ap.add_argument("--lines", type=int, default=20)
    ap.add_argument("--seed", type=int, default=5)
    a = ap.parse_args()
    rng = random.Random(a.seed)
    G, T, L = a.gens, a.periods, a.lines
    pmax = [round(rng.uniform(40, 120)) for _ in range(G)]
    pmin = [round(p * rng.uniform(0.2, 0.4)) for p in pmax]
    cost = [round(rng.uniform(10, 40), 1) for _ in range(G)]
    noload = [round(rng.uniform(50, 200)) for _ in range(G)]
    ramp = [round(p * rng.uniform(0.5, 0.8)) for p in pmax]
    total = sum(pmax)
    demand = [round(total * (0.45 + 0.2 * (1 - abs(t - T / 2) / (T / 2)))) for t in range(T)]
    ptdf = [[round(rng.uniform(-0.5, 0.5), 2) for _ in range(G)] for _ in range(L)]
    flow_cap = [round(rng.uniform(0.5, 0.9) * sum(abs(x) * pm for x, pm in zip(row, pmax)), 1) for row in ptdf]

    p = lambda g, t: f"p_{g}_{t}"
    u = lambda g, t: f"u_{g}_{t}"
    lines = [f"\\Problem name: scuc_like_G{G}_T{T}_L{L}", "Minimize"]
    obj = []
    for g in range(G):
        for t in range(T):
            obj.append((cost[g], p(g, t)))
            obj.append((noload[g], u(g, t)))
    lines.append(" obj: " + terms(obj))
    lines.append("Subject To")
    for t in range(T):
        lines.append(f" demand_{t}: " + terms([(1, p(g, t)) for g in range(G)]) + f" >= {fmt(demand[t])}")
    for g in range(G):
        for t in range(T):
            lines.append(f" cap_{g}_{t}: " + terms([(1, p(g, t)), (-pmax[g], u(g, t))]) + " <= 0")
            lines.append(f" min_{g}_{t}: " + terms([(1, p(g, t)), (-pmin[g], u(g, t))]) + " >= 0")
    for g in range(G):
        for t in range(1, T):
            lines.append(f" rup_{g}_{t}: " + terms([(1, p(g, t)), (-1, p(g, t - 1))]) + f" <= {fmt(ramp[g])}")
            lines.append(f" rdn_{g}_{t}: " + terms([(1, p(g, t - 1)), (-1, p(g, t))]) + f" <= {fmt(ramp[g])}")
    for l in range(L):
        for t in range(T):
            pairs = [(ptdf[l][g], p(g, t)) for g in range(G) if ptdf[l][g] != 0]
            lines.append(f" line_{l}_{t}: " + terms(pairs) + f" <= {fmt(flow_cap[l])}")
    lines.append("Bounds")
    for g in range(G):
        for t in range(T):
            lines.append(f" 0 <= {p(g, t)} <= {fmt(pmax[g])}")
            lines.append(f" 0 <= {u(g, t)} <= 1")
    lines.append("End")
    with open(a.out, "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
