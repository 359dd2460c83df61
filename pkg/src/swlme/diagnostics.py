"""Machine checks of the model's energy structure, and reference solutions.

The energy equation of the linearized moment system follows from the
continuity, momentum, and moment-coefficient equations using only
linearity and the product rule, so every step of that derivation is a
pointwise polynomial identity in the field values and their first
derivatives.  FreeSample therefore carries independent "slots" for each
time/space derivative; no compatibility between values and slots is
assumed, and the identities must hold for arbitrary slot values.  Defects
are normalized by the sum of the absolute values of the combined terms.

Also here: the finite-difference check that the entropy variables are the
energy gradient, the exact wet-bed dam-break reference solution, and
energy/convergence reports for solver trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from swlme.model import energy, entropy_vars, moment_weights, to_primitive
from swlme.solver import Scenario, Trajectory, run

_TINY = np.finfo(float).tiny


@dataclass
class FreeSample:
    """Field values plus independent derivative slots, broadcastable batches.

    Scalar fields may be floats or arrays of a common batch shape; u, dt_u,
    and dx_u carry a trailing moment axis of length N (possibly zero).
    There is no dt_b slot: the bottom is constant in time.
    """

    h: np.ndarray
    um: np.ndarray
    u: np.ndarray
    b: np.ndarray
    dt_h: np.ndarray
    dx_h: np.ndarray
    dt_um: np.ndarray
    dx_um: np.ndarray
    dt_u: np.ndarray
    dx_u: np.ndarray
    dx_b: np.ndarray

    def __post_init__(self):
        for name in ("h", "um", "u", "b", "dt_h", "dx_h", "dt_um", "dx_um",
                     "dt_u", "dx_u", "dx_b"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.h <= 0.0):
            raise ValueError("FreeSample requires h > 0")

    @property
    def n_moments(self) -> int:
        return self.u.shape[-1]

    @classmethod
    def random(cls, rng: np.random.Generator, size: int, n_moments: int,
               h_range=(0.1, 3.0), b_range=(0.0, 1.0), value_range=(-2.0, 2.0)):
        """Batch of samples with O(1) values and unconstrained slots."""
        lo, hi = value_range
        def scalars():
            return rng.uniform(lo, hi, size)
        def moments():
            return rng.uniform(lo, hi, (size, n_moments))
        return cls(
            h=rng.uniform(*h_range, size), um=scalars(), u=moments(),
            b=rng.uniform(*b_range, size),
            dt_h=scalars(), dx_h=scalars(), dt_um=scalars(), dx_um=scalars(),
            dt_u=moments(), dx_u=moments(), dx_b=scalars(),
        )


def _wsum(u: np.ndarray) -> np.ndarray:
    """T = sum_i u_i^2/(2i+1), and 0.0 with no moments."""
    n = u.shape[-1]
    return (u * u) @ moment_weights(n) if n else np.zeros(u.shape[:-1])


def _stack(*terms) -> np.ndarray:
    """Stack expanded terms on a fresh trailing axis (broadcasting them first)."""
    return np.stack(np.broadcast_arrays(*terms), axis=-1)


def _by(factor: np.ndarray, terms: np.ndarray) -> np.ndarray:
    """Multiply an equation's term stack by a field quantity."""
    return np.asarray(factor)[..., None] * terms


def _plus(*stacks) -> np.ndarray:
    """Combine equations by concatenating their term stacks."""
    shapes = [st.shape[:-1] for st in stacks]
    common = np.broadcast_shapes(*shapes)
    return np.concatenate([np.broadcast_to(st, common + st.shape[-1:]) for st in stacks], axis=-1)


def _defect(lhs: np.ndarray, rhs: np.ndarray) -> float:
    """Max relative defect: |sum lhs - sum rhs| over the summed |terms|."""
    num = np.abs(lhs.sum(axis=-1) - rhs.sum(axis=-1))
    den = np.abs(lhs).sum(axis=-1) + np.abs(rhs).sum(axis=-1)
    return float(np.max(num / np.maximum(den, _TINY))) if num.size else 0.0


def _flatten_moments(terms: np.ndarray) -> np.ndarray:
    """Merge the moment axis of a per-moment equation into its term axis."""
    return terms.reshape(terms.shape[:-2] + (-1,))


class _Expansions:
    """Product-rule term stacks of every displayed equation, on one sample.

    Scalar equations have stacks of shape batch + (terms,); the per-moment
    equations carry batch + (N, terms).
    """

    def __init__(self, s: FreeSample, g: float):
        w = moment_weights(s.n_moments)
        T = _wsum(s.u)
        dxT = 2.0 * ((s.u * s.dx_u) @ w) if s.n_moments else np.zeros(np.shape(s.dx_h))
        dtT = 2.0 * ((s.u * s.dt_u) @ w) if s.n_moments else np.zeros(np.shape(s.dt_h))
        h, um, b = s.h, s.um, s.b

        self.continuity = _stack(s.dt_h, s.dx_h * um, h * s.dx_um)
        self.momentum = _stack(
            s.dt_h * um, h * s.dt_um,
            s.dx_h * um**2, 2.0 * h * um * s.dx_um,
            s.dx_h * T, h * dxT,
            g * h * s.dx_h, g * h * s.dx_b,
        )
        # same balance with the pressure gradient grouped as g h dx(h + b)
        self.momentum_split = _stack(
            s.dt_h * um, h * s.dt_um,
            s.dx_h * um**2, 2.0 * h * um * s.dx_um,
            s.dx_h * T, h * dxT,
            g * h * (s.dx_h + s.dx_b),
        )
        self.momentum_advective = _stack(
            h * s.dt_um, h * um * s.dx_um, g * h * (s.dx_h + s.dx_b), s.dx_h * T, h * dxT,
        )
        self.momentum_skew = _stack(
            0.5 * s.dt_h * um, 0.5 * h * s.dt_um, 0.5 * h * s.dt_um,
            0.5 * s.dx_h * um**2, h * um * s.dx_um, 0.5 * h * um * s.dx_um,
            g * h * (s.dx_h + s.dx_b), s.dx_h * T, h * dxT,
        )
        self.kinetic = _stack(
            0.5 * s.dt_h * um**2, h * um * s.dt_um,
            0.5 * s.dx_h * um**3, 1.5 * h * um**2 * s.dx_um,
            g * h * um * (s.dx_h + s.dx_b), um * s.dx_h * T, um * h * dxT,
        )
        self.potential = _stack(
            g * h * s.dt_h, g * b * s.dt_h,
            g * (h + b) * s.dx_h * um, g * (h + b) * h * s.dx_um,
        )
        self.total_kinetic = _stack(
            0.5 * s.dt_h * um**2, h * um * s.dt_um, 0.5 * s.dt_h * T, 0.5 * h * dtT,
            0.5 * s.dx_h * um**3, 1.5 * h * um**2 * s.dx_um,
            g * h * um * (s.dx_h + s.dx_b),
            1.5 * s.dx_h * um * T, 1.5 * h * s.dx_um * T, 1.5 * h * um * dxT,
        )
        # dt(e) terms first, then dx(f) terms (split kept for the corruption hook)
        self.energy_time = _stack(
            0.5 * s.dt_h * um**2, h * um * s.dt_um, 0.5 * s.dt_h * T, 0.5 * h * dtT,
            g * h * s.dt_h, g * b * s.dt_h,
        )
        self.energy_flux = _stack(
            0.5 * s.dx_h * um**3, 1.5 * h * um**2 * s.dx_um,
            1.5 * s.dx_h * um * T, 1.5 * h * s.dx_um * T, 1.5 * h * um * dxT,
            g * s.dx_h * um * (h + b), g * h * s.dx_um * (h + b),
            g * h * um * s.dx_h, g * h * um * s.dx_b,
        )

        uu, h_, um_ = s.u, h[..., None], um[..., None]
        dth_, dxh_ = s.dt_h[..., None], s.dx_h[..., None]
        dxum_ = s.dx_um[..., None]
        self.moment = _stack(
            dth_ * uu, h_ * s.dt_u,
            2.0 * dxh_ * um_ * uu, 2.0 * h_ * dxum_ * uu, 2.0 * h_ * um_ * s.dx_u,
            -um_ * dxh_ * uu, -um_ * h_ * s.dx_u,
        )
        self.moment_split = _stack(
            dth_ * uu, h_ * s.dt_u,
            dxh_ * um_ * uu, h_ * dxum_ * uu, h_ * um_ * s.dx_u,
            h_ * uu * dxum_,
        )
        self.moment_advective = _stack(h_ * s.dt_u, h_ * um_ * s.dx_u, h_ * uu * dxum_)
        self.moment_skew = _stack(
            0.5 * dth_ * uu, 0.5 * h_ * s.dt_u, 0.5 * h_ * s.dt_u,
            0.5 * dxh_ * um_ * uu, 0.5 * h_ * dxum_ * uu,
            0.5 * h_ * um_ * s.dx_u, 0.5 * h_ * um_ * s.dx_u,
            h_ * uu * dxum_,
        )
        self.moment_kinetic = w[..., None] * _stack(
            0.5 * dth_ * uu**2, h_ * uu * s.dt_u,
            0.5 * dxh_ * um_ * uu**2, 0.5 * h_ * dxum_ * uu**2, h_ * um_ * uu * s.dx_u,
            h_ * uu**2 * dxum_,
        )


def residual_C_M_ui(s: FreeSample, g: float) -> np.ndarray:
    """Left-minus-right residuals of the N+2 balance equations on the slots.

    Every time/space derivative of a product is expanded by the product
    rule into the sample's slots, e.g. dt(h um) -> dt_h um + h dt_um.
    Returns shape batch + (N+2,).
    """
    ex = _Expansions(s, g)
    return np.concatenate(
        [
            ex.continuity.sum(axis=-1)[..., None],
            ex.momentum.sum(axis=-1)[..., None],
            ex.moment.sum(axis=-1),
        ],
        axis=-1,
    )


def energy_residual(s: FreeSample, g: float, flux_scale: float = 1.0) -> np.ndarray:
    """Slot expansion of dt(e) + dx(f) for the total energy pair.

    flux_scale multiplies the flux part; anything but 1.0 deliberately
    corrupts the expansion (negative-control hook for the check command).
    """
    ex = _Expansions(s, g)
    return ex.energy_time.sum(axis=-1) + flux_scale * ex.energy_flux.sum(axis=-1)


def check_total_energy_identity(s: FreeSample, g: float, flux_scale: float = 1.0) -> float:
    """Max relative defect of the entropy-variable combination over the batch.

    Contracting the balance residuals with the entropy variables must
    reproduce the energy residual: q1 R_C + q2 R_M + sum_i q_ui R_ui = R_E
    for arbitrary slot values.
    """
    ex = _Expansions(s, g)
    W = np.concatenate([s.h[..., None], s.um[..., None], s.u], axis=-1)
    q = entropy_vars(W, s.b, g)
    lhs = _plus(_by(q.q1, ex.continuity), _by(q.q2, ex.momentum),
                _flatten_moments(q.q_u[..., None] * ex.moment))
    rhs = _plus(ex.energy_time, flux_scale * ex.energy_flux)
    return _defect(lhs, rhs)


def check_skew_forms(s: FreeSample, g: float) -> dict:
    """Max relative defect of every intermediate step of the energy derivation.

    Each named identity compares an independently expanded form of one
    displayed equation against the stated combination of earlier ones:
    the potential-energy equation is g(h+b) times continuity; the
    advective momentum/moment forms subtract velocity times continuity;
    their skew-symmetric averages halve the two forms; kinetic energies
    multiply the skew forms by the velocity; and the total energy is the
    total kinetic plus potential energy.
    """
    ex = _Expansions(s, g)
    w = moment_weights(s.n_moments)

    out = {
        "potential_energy": _defect(ex.potential, _by(g * (s.h + s.b), ex.continuity)),
        "momentum_rewrite": _defect(ex.momentum_split, ex.momentum),
        "momentum_advective": _defect(
            ex.momentum_advective, _plus(ex.momentum_split, _by(-s.um, ex.continuity))
        ),
        "momentum_skew_average": _defect(
            ex.momentum_skew, _plus(0.5 * ex.momentum_advective, 0.5 * ex.momentum_split)
        ),
        "kinetic_energy": _defect(ex.kinetic, _by(s.um, ex.momentum_skew)),
    }
    if s.n_moments:
        cont_m = ex.continuity[..., None, :]  # broadcast over the moment axis
        out["moment_rewrite"] = _defect(ex.moment_split, ex.moment)
        out["moment_advective"] = _defect(
            ex.moment_advective, _plus(ex.moment_split, -s.u[..., None] * cont_m)
        )
        out["moment_skew_average"] = _defect(
            ex.moment_skew, _plus(0.5 * ex.moment_advective, 0.5 * ex.moment_split)
        )
        out["moment_kinetic_energy"] = _defect(
            ex.moment_kinetic, (w * s.u)[..., None] * ex.moment_skew
        )
        out["total_kinetic_energy"] = _defect(
            ex.total_kinetic, _plus(ex.kinetic, _flatten_moments(ex.moment_kinetic))
        )
    else:
        out["total_kinetic_energy"] = _defect(ex.total_kinetic, ex.kinetic)
    out["total_energy_sum"] = _defect(
        _plus(ex.energy_time, ex.energy_flux), _plus(ex.total_kinetic, ex.potential)
    )
    return out


def gradient_check_entropy(W: np.ndarray, b, g: float, rel_step: float = 1e-6) -> float:
    """Compare finite differences of the energy with the entropy variables.

    Central differences in each conserved variable with a step scaled to
    its magnitude; returns the worst relative deviation, with a floor of
    one on the normalizing magnitude.  Broadcasts over a batch of states.
    """
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float)
    n = W.shape[-1]
    U = np.array(W)
    U[..., 1:] = W[..., 1:] * W[..., :1]

    q = entropy_vars(W, b, g)
    exact = np.concatenate([np.atleast_1d(q.q1)[..., None],
                            np.atleast_1d(q.q2)[..., None],
                            np.atleast_2d(q.q_u)], axis=-1).reshape(U.shape)

    worst = 0.0
    for m in range(n):
        step = rel_step * np.maximum(1.0, np.abs(U[..., m]))
        Up, Um = U.copy(), U.copy()
        Up[..., m] += step
        Um[..., m] -= step
        fd = (energy(to_primitive(Up), b, g).e - energy(to_primitive(Um), b, g).e) / (2.0 * step)
        dev = np.abs(fd - exact[..., m]) / np.maximum(1.0, np.abs(exact[..., m]))
        worst = max(worst, float(np.max(dev)))
    return worst


def stoker_intermediate(h_l: float, h_r: float, g: float):
    """Middle depth, velocity, and bore speed of the wet-bed dam break.

    Solves 2 (sqrt(g h_l) - sqrt(g h_m)) =
    (h_m - h_r) sqrt(g (h_m + h_r) / (2 h_m h_r)) by safeguarded Newton
    iteration on (h_r, h_l) to residual 1e-13.
    """
    if not (h_l > h_r > 0.0):
        raise ValueError(f"need h_l > h_r > 0, got h_l={h_l}, h_r={h_r}")

    c_l = np.sqrt(g * h_l)

    def relation(hm):
        rare = 2.0 * (c_l - np.sqrt(g * hm))
        bore = (hm - h_r) * np.sqrt(0.5 * g * (hm + h_r) / (hm * h_r))
        return rare - bore

    lo, hi = h_r, h_l
    hm = 0.5 * (lo + hi)
    for _ in range(200):
        f = relation(hm)
        if abs(f) <= 1e-13:
            break
        # keep the bracket: relation is decreasing in h_m
        if f > 0.0:
            lo = hm
        else:
            hi = hm
        df = (relation(hm + 1e-8) - relation(hm - 1e-8)) / 2e-8
        trial = hm - f / df if df != 0.0 else 0.5 * (lo + hi)
        hm = trial if lo < trial < hi else 0.5 * (lo + hi)
    else:
        raise RuntimeError(
            f"dam-break depth relation did not converge: bracket [{lo}, {hi}], residual {relation(hm)}"
        )
    u_mid = 2.0 * (c_l - np.sqrt(g * hm))
    bore_speed = hm * u_mid / (hm - h_r)
    return float(hm), float(u_mid), float(bore_speed)


def stoker_dam_break(h_l: float, h_r: float, g: float, x, t: float) -> np.ndarray:
    """Exact wet-bed dam-break profile, self-similar in x/t.

    Returns primitive states [h, u_m] at the given positions: undisturbed
    left state, rarefaction fan, constant middle state, then the bore into
    still water.  Requires t > 0.
    """
    if t <= 0.0:
        raise ValueError(f"need t > 0, got {t}")
    h_m, u_mid, bore = stoker_intermediate(h_l, h_r, g)
    c_l = np.sqrt(g * h_l)
    c_m = np.sqrt(g * h_m)

    xi = np.atleast_1d(np.asarray(x, dtype=float)) / t
    h = np.empty_like(xi)
    um = np.empty_like(xi)

    left = xi <= -c_l
    fan = (~left) & (xi < u_mid - c_m)
    mid = (~left) & (~fan) & (xi < bore)
    right = xi >= bore

    h[left], um[left] = h_l, 0.0
    c_fan = (2.0 * c_l - xi[fan]) / 3.0
    h[fan] = c_fan**2 / g
    um[fan] = 2.0 * (xi[fan] + c_l) / 3.0
    h[mid], um[mid] = h_m, u_mid
    h[right], um[right] = h_r, 0.0
    out = np.stack([h, um], axis=-1)
    return out if np.ndim(x) else out[0]


@dataclass
class EnergyReport:
    """Per-snapshot totals; the dissipation rate is one entry shorter."""

    times: np.ndarray
    mass: np.ndarray
    momentum: np.ndarray
    total_energy: np.ndarray
    dissipation_rate: np.ndarray  # -(dE/dt) by backward differences


def energy_report(trajectory: Trajectory, topography, g: float) -> EnergyReport:
    """Integrate mass, momentum, and energy over each recorded snapshot."""
    b = np.asarray(topography.b, dtype=float)
    dx = trajectory.dx
    times = np.asarray(trajectory.times, dtype=float)
    mass = np.empty(times.size)
    mom = np.empty(times.size)
    etot = np.empty(times.size)
    for k, U in enumerate(trajectory.snapshots):
        mass[k] = U[:, 0].sum() * dx
        mom[k] = U[:, 1].sum() * dx
        etot[k] = energy(to_primitive(U), b, g).e.sum() * dx
    if times.size > 1:
        rate = -np.diff(etot) / np.diff(times)
    else:
        rate = np.empty(0)
    return EnergyReport(times=times, mass=mass, momentum=mom,
                        total_energy=etot, dissipation_rate=rate)


def _restrict(h_fine: np.ndarray, coarse_cells: int) -> np.ndarray:
    ratio, rem = divmod(h_fine.size, coarse_cells)
    if rem:
        raise ValueError(f"cannot restrict {h_fine.size} cells onto {coarse_cells}")
    return h_fine.reshape(coarse_cells, ratio).mean(axis=1)


def convergence_study(scenario: Scenario, meshes) -> list:
    """L1(h) errors and observed orders across a list of cell counts.

    A flat-bottom dam break of the plain shallow water system (no moments)
    is compared against the exact solution on every mesh.  Any other
    scenario is compared against its own finest mesh, restricted by block
    averaging onto the coarser (dyadically nested) meshes; the finest mesh
    then serves as the reference and gets no row.  Returns rows of
    (cells, l1_error, observed_order-or-None).
    """
    meshes = [int(m) for m in meshes]
    if not meshes:
        raise ValueError("need at least one mesh")

    exact = (
        scenario.ic_name == "dam_break"
        and scenario.params.N == 0
        and not np.any(scenario.topography.b)
    )

    def final_h(cells: int) -> np.ndarray:
        traj = run(scenario.with_cells(cells))
        if traj.failure:
            raise RuntimeError(f"run on {cells} cells failed: {traj.failure}")
        return traj.snapshots[-1][:, 0]

    errors = []
    if exact:
        rows_meshes = meshes
        h_l = float(scenario.ic_params.get("h_l", 1.0))
        h_r = float(scenario.ic_params.get("h_r", 0.5))
        x0 = float(scenario.ic_params.get("x0", 0.0))
        for m in rows_meshes:
            sc = scenario.with_cells(m)
            h_ref = stoker_dam_break(h_l, h_r, scenario.params.g,
                                     sc.grid.centers - x0, scenario.t_end)[:, 0]
            errors.append(float(np.abs(final_h(m) - h_ref).sum() * sc.grid.dx))
    else:
        if len(meshes) < 2:
            raise ValueError("self-reference mode needs at least two meshes")
        for prev, nxt in zip(meshes, meshes[1:]):
            if nxt % prev or (nxt // prev) & (nxt // prev - 1):
                raise ValueError(f"meshes must be dyadically nested, got {prev} -> {nxt}")
        rows_meshes = meshes[:-1]
        h_ref_fine = final_h(meshes[-1])
        for m in rows_meshes:
            dx = (scenario.grid.x_max - scenario.grid.x_min) / m
            errors.append(float(np.abs(final_h(m) - _restrict(h_ref_fine, m)).sum() * dx))

    rows = []
    for k, (m, err) in enumerate(zip(rows_meshes, errors)):
        if k == 0 or errors[k] == 0.0 or errors[k - 1] == 0.0:
            order = None
        else:
            order = float(np.log2(errors[k - 1] / errors[k]) / np.log2(rows_meshes[k] / rows_meshes[k - 1]))
        rows.append((m, err, order))
    return rows
