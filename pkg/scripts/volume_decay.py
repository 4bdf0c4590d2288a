"""Volume-decay experiments: flowed squares under a linear diagonal flow and
small random squares transported by the synchronverter dynamics."""

import numpy as np

from kcontract import models, sim


def linear_square():
    A = np.diag([-1.0, -2.0])
    print("unit square under xdot = diag(-1,-2) x  (exact area: e^{-3t})")
    for t in (0.25, 0.5, 1.0, 2.0):
        grid = sim.ImmersionGrid.from_function(lambda r: r.copy(), 2, 64, 2)
        flowed = sim.flow_immersion(grid, lambda x: A @ x, t, 1e-3,
                                    field_batch=lambda X: X @ A.T)
        V = sim.volume_of_immersion(flowed, np.eye(2))
        print(f"  t={t:<5} V={V:.6f}  e^-3t={np.exp(-3 * t):.6f}")


def synchronverter_squares(count=5):
    bundle = models.builtin("synchronverter")
    box = bundle.box
    rng = np.random.default_rng(1)
    times = [0.0, 0.1, 0.2, 0.3, 0.4]
    print(f"\nsmall squares in the synchronverter box, areas at t={times}")
    for i in range(count):
        c = box.sample(rng, 1)[0]
        c = np.clip(c, box.lower + 0.05 * (box.upper - box.lower),
                    box.upper - 0.05 * (box.upper - box.lower))
        Qm, _ = np.linalg.qr(rng.standard_normal((4, 2)))
        grid = sim.ImmersionGrid.from_function(
            lambda r: c + 0.01 * (r[0] * Qm[:, 0] + r[1] * Qm[:, 1]), 2, 12, 4)
        vols = [sim.volume_of_immersion(grid, np.eye(4))]
        for t1, t2 in zip(times[:-1], times[1:]):
            grid = sim.flow_immersion(grid, bundle.model.f, t2 - t1, 1e-3,
                                      field_batch=bundle.model.f_batch)
            vols.append(sim.volume_of_immersion(grid, np.eye(4)))
        print(f"  square {i}: " + "  ".join(f"{v:.3e}" for v in vols))


if __name__ == "__main__":
    linear_square()
    synchronverter_squares()
