#!/usr/bin/env python3
"""Solve an LP file with HiGHS and write a plain solution file.

usage: highs_solve.py MODEL.lp SOLUTION.txt [time_limit]

Solution file lines:
  status <Optimal|Infeasible|Unbounded|Error|TimeLimit>
  objective <value>
  iterations <n>
  col <name> <value>
  dual <row name> <value>
  reduced <col name> <value>
  message <text>
"""
import sys


def main():
    if len(sys.argv) < 3:
        print(__doc__, file=sys.stderr)
        return 2
    model_path, out_path = sys.argv[1], sys.argv[2]
    try:
        import highspy
    except ImportError:
        with open(out_path, "w") as out:
            out.write("status Error\nmessage highspy is not installed\n")
        return 3

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    if len(sys.argv) > 3:
        h.setOptionValue("time_limit", float(sys.argv[3]))
    if h.readModel(model_path) != highspy.HighsStatus.kOk:
        with open(out_path, "w") as out:
            out.write("status Error\nmessage HiGHS could not read the model\n")
        return 0
    h.run()
    ms = h.getModelStatus()
    S = highspy.HighsModelStatus
    status = {
        S.kOptimal: "Optimal",
        S.kInfeasible: "Infeasible",
        S.kUnbounded: "Unbounded",
        S.kUnboundedOrInfeasible: "Infeasible",
        S.kTimeLimit: "TimeLimit",
        S.kIterationLimit: "TimeLimit",
    }.get(ms, "Error")
    lines = ["status " + status]
    if status == "Optimal":
        info = h.getInfo()
        lp = h.getLp()
        sol = h.getSolution()
        lines.append("objective %r" % info.objective_function_value)
        lines.append("iterations %d" % info.simplex_iteration_count)
        for name, v in zip(lp.col_names_, sol.col_value):
            lines.append("col %s %r" % (name, v))
        if sol.dual_valid:
            for name, v in zip(lp.row_names_, sol.row_dual):
                lines.append("dual %s %r" % (name, v))
            for name, v in zip(lp.col_names_, sol.col_dual):
                lines.append("reduced %s %r" % (name, v))
    else:
        lines.append("message " + h.modelStatusToString(ms))
    with open(out_path, "w") as out:
        out.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
