"""Error of the retraction integrators against the exact rotation as the step count doubles.

Prints the error at the final time and the ratio to the next finer run for
a constant velocity about e3 and for the time-varying velocity (0, 0, 1 + t).
"""
import numpy as np

from odtmotion.so3 import axis_rotation_z, integrate_rotation

CASES = {
    "constant (0,0,1) to t=pi/2": (np.pi / 2, lambda t: np.ones_like(t), np.pi / 2),
    "varying (0,0,1+t) to t=1": (1.0, lambda t: 1.0 + t, 1.5),
}


def main():
    for title, (t_end, speed, angle) in CASES.items():
        print(title)
        for method in ("polar", "cayley"):
            errs = []
            for steps in (100, 200, 400, 800):
                t = np.linspace(0.0, t_end, steps + 1)
                w = np.column_stack([np.zeros_like(t), np.zeros_like(t), speed(t)])
                errs.append(np.linalg.norm(integrate_rotation(t, w, method)[-1] - axis_rotation_z(angle)))
            ratios = np.array(errs[:-1]) / np.array(errs[1:])
            print(f"  {method:6s} errors {np.array2string(np.array(errs), precision=3)} "
                  f"ratios {np.array2string(ratios, precision=3)}")


if __name__ == "__main__":
    main()
