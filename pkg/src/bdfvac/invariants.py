"""Randomized invariant battery shared by the CLI and the acceptance suite.

Each check draws from a seeded generator and returns (name, passed, detail);
the battery is deterministic for a fixed seed.  Checks cover the quantitative
inequalities of the model (potential sup-norm, exchange vs kinetic, response
kernel bounds, screening-defect envelope) plus the structural laws
(transform unitarity, projector algebra, charge bookkeeping).
"""

from __future__ import annotations

import zlib

import numpy as np

from . import coulomb, dirac, states
from .coulomb import ChargeDensity, b_function, u_function, u_envelope
from .lattice import MomentumLattice, SpinorField, to_momentum, to_position, cutoff_project, l2_norm
from .spectral import projector_below
from .states import VacuumState

__all__ = ["run_battery", "random_density", "random_admissible_state", "CHECKS"]


def random_density(lattice: MomentumLattice, rng: np.random.Generator,
                   smooth: float = 1.0) -> ChargeDensity:
    """Zero-mean random real density with Gaussian-damped momentum content."""
    n = lattice.n
    pos = rng.standard_normal((n, n, n))
    hat = np.fft.fftn(pos, norm="ortho")
    k2 = lattice.k2_grid.reshape(n, n, n)
    hat *= np.exp(-0.5 * smooth * k2)
    hat[0, 0, 0] = 0.0
    return ChargeDensity.from_momentum(lattice, hat, imag_tol=1e-8)


def random_spinor_field(lattice: MomentumLattice, rng: np.random.Generator) -> SpinorField:
    n = lattice.n
    vals = rng.standard_normal((n, n, n, 4)) + 1j * rng.standard_normal((n, n, n, 4))
    return SpinorField(lattice, vals, "position")


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (a + a.conj().T)


def random_admissible_state(lattice: MomentumLattice, rng: np.random.Generator,
                            strength: float = 0.5, projector: bool = True) -> VacuumState:
    """Admissible Q: projector difference of a perturbed sea, or a soft filling."""
    h = dirac.free_operator(lattice) + strength * random_hermitian(lattice.dim, rng)
    _, p_minus = dirac.free_projectors(lattice)
    if projector:
        p, _ = projector_below(h, 0.0, gap_tol=1e-12)
        prov = "manual"
    else:
        w, u = np.linalg.eigh(h)
        fill = 1.0 / (1.0 + np.exp(w / 0.2))
        p = (u * fill) @ u.conj().T
        prov = "manual"
    return VacuumState(lattice, p - p_minus, provenance=prov)


# ---------------------------------------------------------------------------
# individual checks; each returns (passed, detail)
# ---------------------------------------------------------------------------


def check_transform_unitarity(lattice, rng, count=100):
    worst = 0.0
    for _ in range(count):
        f = random_spinor_field(lattice, rng)
        g = to_position(to_momentum(f))
        num = np.linalg.norm(g.values - f.values)
        den = np.linalg.norm(f.values)
        worst = max(worst, num / den)
        worst = max(worst, abs(l2_norm(to_momentum(f)) - l2_norm(f)) / l2_norm(f))
    return worst <= 1e-12, f"worst relative round-trip/Parseval error {worst:.2e}"


def check_cutoff_projector(lattice, rng, count=25):
    # bitwise idempotency holds in the momentum representation (pure masking)
    worst = 0.0
    for _ in range(count):
        f = to_momentum(random_spinor_field(lattice, rng))
        p1 = cutoff_project(f)
        p2 = cutoff_project(p1)
        worst = max(worst, np.linalg.norm(p2.values - p1.values))
    return worst == 0.0, f"worst idempotency defect {worst:.2e}"


def check_conjugation_symmetry(lattice, rng, count=25):
    n = lattice.n
    worst = 0.0
    for _ in range(count):
        rho = rng.standard_normal((n, n, n))
        hat = np.fft.fftn(rho, norm="ortho")
        flip = hat[np.ix_(-np.arange(n) % n, -np.arange(n) % n, -np.arange(n) % n)]
        worst = max(worst, np.max(np.abs(flip.conj() - hat)) / np.max(np.abs(hat)))
    return worst <= 1e-12, f"worst hermitian-symmetry defect {worst:.2e}"


def check_dirac_square(lattice, rng, count=200):
    worst = 0.0
    for _ in range(count):
        k = rng.standard_normal(3) * 3
        h = dirac.dirac_block(k)
        worst = max(worst, np.max(np.abs(h @ h - (1 + k @ k) * np.eye(4))))
    return worst <= 1e-12, f"worst |(a.k+b)^2 - E^2| = {worst:.2e}"


def check_free_spectrum(lattice, rng):
    w = np.linalg.eigvalsh(dirac.free_operator(lattice))
    sym = np.max(np.abs(np.sort(w) + np.sort(-w)[::-1]))
    emax = np.sqrt(1 + lattice.cutoff**2)
    inside = np.all((np.abs(w) >= 1 - 1e-12) & (np.abs(w) <= emax + 1e-12))
    return sym <= 1e-10 and inside, f"symmetry defect {sym:.2e}, |spec| in [1, {emax:.4g}]"


def check_potential_supnorm(lattice, rng, count=50):
    """|V_rho|_inf <= 2 sqrt(pi) max(|rho|_2, |rho|_C) on random densities."""
    worst = 0.0
    for _ in range(count):
        rho = random_density(lattice, rng, smooth=float(rng.uniform(0.2, 2.0)))
        v = coulomb.coulomb_potential(rho)
        bound = 2 * np.sqrt(np.pi) * coulomb.l2c_norm(rho)
        worst = max(worst, np.max(np.abs(v)) / bound)
    return worst <= 1.0, f"worst |V|_inf / bound = {worst:.4f}"


def check_hardy_kato(lattice, rng, count=50):
    """Exchange energy <= (pi/2) tr(|D0| Q^2) on random admissible states."""
    absd = dirac.abs_free_diagonal(lattice)
    worst = 0.0
    for i in range(count):
        st = random_admissible_state(lattice, rng, strength=0.5 + 0.1 * (i % 5),
                                     projector=(i % 2 == 0))
        q = st.q_matrix
        ex = states.exchange_energy(lattice, q)
        rhs = (np.pi / 2) * float(np.real(np.sum(absd * np.diag(q @ q).real)))
        worst = max(worst, ex / rhs)
    return worst <= 1.0, f"worst exchange / (pi/2 tr|D0|Q^2) = {worst:.4f}"


def check_g10_s2_bound(lattice, rng, count=50):
    """|G(rho)|_S2 <= 4 |rho|_C on random densities."""
    worst = 0.0
    for _ in range(count):
        rho = random_density(lattice, rng, smooth=float(rng.uniform(0.2, 2.0)))
        g = states.g10(rho)
        worst = max(worst, states.s2_norm(g) / (4 * coulomb.coulomb_norm(rho)))
    return worst <= 1.0, f"worst |G|_S2 / 4|rho|_C = {worst:.4f}"


def check_m_kernel_bound(lattice, rng, count=10000):
    """|M(p,q)|_F^2 <= 16 |p-q|^2 / E(p+q)^4 on random momentum pairs."""
    p = rng.standard_normal((count, 3)) * 4
    q = rng.standard_normal((count, 3)) * 4
    worst = 0.0
    for i in range(count):
        mm = dirac.m_kernel(p[i], q[i])
        lhs = np.sum(np.abs(mm) ** 2)
        rhs = 16 * np.sum((p[i] - q[i]) ** 2) / (1 + np.sum((p[i] + q[i]) ** 2)) ** 2
        if rhs == 0.0:
            worst = max(worst, lhs)
        else:
            worst = max(worst, lhs / rhs)
    return worst <= 1.0, f"worst |M|^2 / bound = {worst:.4f}"


def check_u_envelope(lattice, rng, count=60):
    """0 <= u_function(r) <= (258/pi)(1 + log(1+r^2)/(3 pi)) on log-spaced radii."""
    lam = lattice.cutoff
    radii = np.concatenate([[0.0], np.geomspace(1e-3, 10 * lam, count - 1)])
    worst_low, worst_ratio = 0.0, 0.0
    for r in radii:
        u = u_function(float(r), lam)
        worst_low = min(worst_low, u)
        worst_ratio = max(worst_ratio, u / u_envelope(float(r)))
    ok = worst_low >= -1e-10 and worst_ratio <= 1.0
    return ok, f"min u = {worst_low:.2e}, worst u/envelope = {worst_ratio:.4f}"


def check_b_continuity(lattice, rng):
    lam = lattice.cutoff
    vals = [b_function(2 * lam - eps, lam) for eps in (1e-3, 1e-5)]
    ok = abs(vals[-1]) < 1e-4 and b_function(2 * lam + 1e-9, lam) == 0.0
    return ok, f"b just inside 2*cutoff: {vals[-1]:.2e}"


def check_projector_difference_identity(lattice, rng, count=20):
    """Q^2 = Q_pp - Q_mm for projector differences."""
    worst = 0.0
    for _ in range(count):
        st = random_admissible_state(lattice, rng, projector=True)
        worst = max(worst, states.square_identity_residual(lattice, st.q_matrix))
    return worst <= 1e-8, f"worst |Q^2 - (Q_pp - Q_mm)| = {worst:.2e}"


def check_density_trace(lattice, rng, count=20):
    """Volume integral of the density equals the generalized trace."""
    worst = 0.0
    for _ in range(count):
        st = random_admissible_state(lattice, rng, projector=False)
        rho = states.density_of(st)
        worst = max(worst, abs(rho.total_charge - states.generalized_trace(st)))
    return worst <= 1e-10, f"worst |charge(rho) - tr0(Q)| = {worst:.2e}"


def check_coulomb_duality(lattice, rng, count=20):
    """Momentum-sum pairing equals the position-space integral of V_f g."""
    worst = 0.0
    for _ in range(count):
        f = random_density(lattice, rng)
        g = random_density(lattice, rng)
        d1 = coulomb.coulomb_inner(f, g)
        d2 = float(lattice.cell_volume * np.sum(coulomb.coulomb_potential(f) * g.position))
        scale = max(abs(d1), 1e-30)
        worst = max(worst, abs(d1 - d2) / scale)
    return worst <= 1e-10, f"worst relative duality defect {worst:.2e}"


CHECKS = [
    ("transform-unitarity", check_transform_unitarity),
    ("cutoff-projector", check_cutoff_projector),
    ("conjugation-symmetry", check_conjugation_symmetry),
    ("dirac-square", check_dirac_square),
    ("free-spectrum", check_free_spectrum),
    ("potential-supnorm", check_potential_supnorm),
    ("hardy-kato", check_hardy_kato),
    ("g10-s2-bound", check_g10_s2_bound),
    ("m-kernel-bound", check_m_kernel_bound),
    ("u-envelope", check_u_envelope),
    ("b-continuity", check_b_continuity),
    ("projector-difference", check_projector_difference_identity),
    ("density-trace", check_density_trace),
    ("coulomb-duality", check_coulomb_duality),
]


def run_battery(lattice: MomentumLattice, seed: int):
    """Run every check on one lattice; returns a list of (name, ok, detail)."""
    results = []
    for name, fn in CHECKS:
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        try:
            ok, detail = fn(lattice, rng)
        except Exception as err:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(err).__name__}: {err}"
        results.append((name, bool(ok), detail))
    return results
