"""Adaptive multi-step maximum-likelihood phase estimation with Monte Carlo
statistics.

The estimator maximizes  L(phi) = log[ prior(phi) * prod_k p(k|phi)^n_k ],
a maximum-likelihood estimator regularized by the Gaussian knowledge
carried over from the previous step.  A protocol run is:

  step 1   controls at zero, a small slice of the budget, flat prior over
           the torus: a rough estimate.  The rough likelihood can have
           several near-tied peaks (mode-relabeling and conjugation
           symmetries of the splitters), so all peaks within a margin of
           the best are kept as candidate hypotheses.
  step 2+  controls shift the best candidate onto a working point; the
           measured counts re-score every candidate window and the winner's
           refined estimate becomes the new Gaussian prior.  Posterior
           widths add information in precision: cov = (P_prior + nu F)^-1.
  finally  the estimate is refit against the joint likelihood of every
           step's counts, with its width read from the summed per-step
           information sum_s nu_s F_s -- the additivity of the per-step
           Fisher matrices.

Everything is deterministic given the seed; Monte Carlo repetitions use
seeds derived from the master seed by numpy's SeedSequence.generate_state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .fisher import fisher_matrix, invert_fisher, SingularSupportError
from .optics import Interferometer, TWO_PI, four_mode_mzi, three_mode_mzi
from .probes import OutcomeDistribution, Probe, build_model

RUN_RECORD_SCHEMA_VERSION = 1

# Working points of the bundled presets (trace-metric minima of the
# landscapes; the three-mode pair is mirror-symmetric).
THREE_MODE_WORKING_POINTS = ((0.8920298, 2.1908384), (2.1908384, 0.8920298))
FOUR_MODE_WORKING_POINT = (np.pi, np.pi)

# The two-step protocol aims slightly off the exact four-mode working point.
# Near [pi, pi] the outcome distribution is almost symmetric under two
# reflections of the offsets (a, b) from [pi, pi]: through the line
# a + b = phi0 and through the line a = b.  Operating exactly at [pi, pi]
# therefore gives every estimate indistinguishable mirror twins a
# rough-error away and the estimator variance blows up.  Backing off along
# both diagonals moves all mirror images far enough out that the rough-step
# data rejects them, at a small sensitivity cost: sqrt([F^-1]_jj) rises
# from 0.433 at [pi, pi] to about 0.437 at the offset point for
# phi0 = 0.01, which is the protocol's achievable precision per phase.
FOUR_MODE_STEP_OFFSET = (-0.060, -0.160)

# Exact phase-indistinguishability groups of the presets: shifting the
# unknown phases by any of these vectors leaves every outcome probability
# unchanged (for all control settings), so the parameters are identifiable
# only modulo the group.  Verified numerically in the test suite.
THREE_MODE_PHASE_GROUP = (
    (0.0, 0.0),
    (2.0 * np.pi / 3.0, -2.0 * np.pi / 3.0),
    (4.0 * np.pi / 3.0, 2.0 * np.pi / 3.0),
)
FOUR_MODE_PHASE_GROUP = ((0.0, 0.0), (np.pi, np.pi))

# Expected estimator std in units of 1/sqrt(nu) for the default protocols.
THREE_MODE_BOUND_COEFF = 0.543
FOUR_MODE_BOUND_COEFF = 0.437


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    return np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi


@dataclass(frozen=True)
class GaussianPrior:
    """Independent Gaussian knowledge per parameter, on the circle."""

    mean: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if mean.shape != sigma.shape:
            raise ValueError("mean and sigma shapes differ")
        if np.any(sigma <= 0):
            raise ValueError("prior sigmas must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sigma", sigma)

    def log_density(self, phases) -> float:
        delta = wrap_angle(np.asarray(phases, dtype=float) - self.mean)
        return float(
            np.sum(-0.5 * (delta / self.sigma) ** 2 - np.log(np.sqrt(TWO_PI) * self.sigma))
        )


@dataclass(frozen=True)
class CountRecord:
    """Occurrence counts aligned with a model's outcome ordering."""

    counts: np.ndarray
    total: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        object.__setattr__(self, "counts", counts)
        if abs(float(counts.sum()) - float(self.total)) > 1e-9 * max(1.0, float(self.total)):
            raise ValueError(f"counts sum to {counts.sum()}, expected {self.total}")


def sample_outcomes(dist: OutcomeDistribution, nu: int, rng) -> CountRecord:
    """Multinomial draw of ``nu`` measurements from a distribution.

    ``rng`` is a numpy Generator or a seed for one; identical seeds give
    identical counts.
    """
    if nu < 1:
        raise ValueError("need nu >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    p = np.maximum(np.asarray(dist.probs, dtype=float), 0.0)
    counts = rng.multinomial(nu, p / p.sum())
    return CountRecord(counts=counts, total=int(nu))


def log_likelihood(counts: CountRecord, prior: GaussianPrior | None, phases, model) -> float:
    """log prior + sum_k n_k log p(k|phases); -inf when an observed outcome
    has zero probability."""
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    dist = model.distribution(np.mod(phases, TWO_PI))
    value = prior.log_density(phases) if prior is not None else 0.0
    observed = counts.counts > 0
    p = dist.probs[observed]
    if np.any(p <= 0.0):
        return -np.inf
    return value + float(np.dot(counts.counts[observed], np.log(p)))


def _data_loglik_batch(counts: CountRecord, model, points: np.ndarray) -> np.ndarray:
    observed = np.flatnonzero(counts.counts > 0)
    probs, _ = model.prob_batch(np.mod(points, TWO_PI))
    p = np.maximum(probs[:, observed], 1e-300)
    return np.log(p) @ counts.counts[observed]


@dataclass(frozen=True)
class MLEstimate:
    estimate: np.ndarray
    sigma: np.ndarray
    log_likelihood: float
    fim_singular: bool


def _sigma_from_fim(counts: CountRecord, model, estimate):
    try:
        fim = fisher_matrix(model.distribution(np.mod(estimate, TWO_PI)))
    except SingularSupportError:
        return None
    inv = invert_fisher(fim)
    if inv.singular:
        return None
    return np.sqrt(np.diag(inv.inverse) / counts.total)


def _joint_sigma(batches, estimate):
    """Width from the summed information of several (counts, model) batches."""
    x = np.mod(np.asarray(estimate, dtype=float), TWO_PI)
    n = len(x)
    info = np.zeros((n, n))
    for counts, model in batches:
        try:
            info += counts.total * fisher_matrix(model.distribution(x)).matrix
        except SingularSupportError:
            continue
    inv = invert_fisher(info, cond_threshold=1e12, det_threshold=1e-30)
    if inv.singular:
        return None
    return np.sqrt(np.clip(np.diag(inv.inverse), 1e-18, None))


def _sigma_from_curvature(counts: CountRecord, prior, model, estimate, h=1e-4):
    """Fallback width from a finite-difference Hessian of the log posterior."""
    n = len(estimate)
    hessian = np.empty((n, n))

    def f(x):
        return log_likelihood(counts, prior, x, model)

    f0 = f(estimate)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        hessian[i, i] = (f(estimate + ei) - 2 * f0 + f(estimate - ei)) / h**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            hessian[i, j] = hessian[j, i] = (
                f(estimate + ei + ej) - f(estimate + ei - ej)
                - f(estimate - ei + ej) + f(estimate - ei - ej)
            ) / (4 * h**2)
    cov = np.linalg.inv(-hessian)
    diag = np.clip(np.diag(cov), 1e-12, None)
    return np.sqrt(diag)


def _refine(counts, prior, model, x0, refine_tol):
    result = minimize(
        lambda x: -log_likelihood(counts, prior, x, model),
        np.asarray(x0, dtype=float),
        method="Nelder-Mead",
        options={"xatol": refine_tol, "fatol": 1e-10, "maxiter": 400},
    )
    return result.x, -result.fun


def ml_estimate(counts: CountRecord, model, prior: GaussianPrior | None = None,
                grid_step: float = 0.02, refine_tol: float = 1e-5,
                window_sigmas: float = 5.0) -> MLEstimate:
    """Maximize the (prior-regularized) log likelihood.

    With a prior, the search grid covers mean +/- window_sigmas * sigma at a
    step no coarser than half the smallest prior width; without one it
    covers the full torus.  The grid maximum is polished by simplex ascent.
    Sigma comes from the inverse FIM at the estimate scaled by the sample
    count, falling back to likelihood curvature when the FIM is singular.
    """
    n_params = model.n_params
    if prior is None:
        steps = max(int(np.ceil(TWO_PI / max(grid_step, 1e-3))), 8)
        axis = np.arange(steps) * TWO_PI / steps
        grids = np.meshgrid(*([axis] * n_params), indexing="ij")
        points = np.column_stack([g.ravel() for g in grids])
    else:
        step = min(grid_step, float(np.min(prior.sigma)) / 2.0)
        half = window_sigmas * np.asarray(prior.sigma, dtype=float)
        offsets = [np.arange(-h, h + step / 2, step) for h in half]
        mesh = np.meshgrid(*offsets, indexing="ij")
        points = np.column_stack([g.ravel() for g in mesh]) + prior.mean

    data = _data_loglik_batch(counts, model, points)
    if prior is not None:
        delta = wrap_angle(points - prior.mean)
        data = data + np.sum(
            -0.5 * (delta / prior.sigma) ** 2
            - np.log(np.sqrt(TWO_PI) * prior.sigma),
            axis=1,
        )
    x0 = points[int(np.argmax(data))]
    x, value = _refine(counts, prior, model, x0, refine_tol)
    best = (x, value)

    estimate = np.mod(best[0], TWO_PI)
    sigma = _sigma_from_fim(counts, model, estimate)
    fim_singular = sigma is None
    if fim_singular:
        sigma = _sigma_from_curvature(counts, prior, model, estimate)
    return MLEstimate(
        estimate=estimate,
        sigma=sigma,
        log_likelihood=best[1],
        fim_singular=fim_singular,
    )


def _likelihood_peaks(batches, grid_step: float,
                      refine_tol: float, keep: int = 24, margin: float = 25.0,
                      dedup_radius: float = 0.15):
    """Local maxima of the joint flat-prior likelihood of one or more
    (counts, model) batches over the torus, sharpened on a batched
    sub-grid, sorted by likelihood; peaks more than ``margin`` nats below
    the best are dropped.

    At a single control setting the likelihood carries many near-tied
    peaks (the exact shift group of the splitters plus reflection-type
    images that only a change of controls can discriminate), so a generous
    ``keep`` matters: every surviving peak is a candidate hypothesis for
    the next step.  Sub-grid accuracy suffices here; the working-point
    refits supply the precision.
    """
    n_params = batches[0][1].n_params
    steps = max(int(np.ceil(TWO_PI / grid_step)), 16)
    axis = np.arange(steps) * TWO_PI / steps
    grids = np.meshgrid(*([axis] * n_params), indexing="ij")
    points = np.column_stack([g.ravel() for g in grids])
    data = _joint_loglik_batch(batches, points).reshape([steps] * n_params)
    is_max = np.ones_like(data, dtype=bool)
    for shifts in np.ndindex(*([3] * n_params)):
        if all(s == 1 for s in shifts):
            continue
        rolled = data
        for ax, s in enumerate(shifts):
            rolled = np.roll(rolled, s - 1, axis=ax)
        is_max &= data >= rolled
    flat_idx = np.flatnonzero(is_max.ravel())
    order = flat_idx[np.argsort(data.ravel()[flat_idx])[::-1]]
    coarse = []
    for idx in order:
        x0 = points[idx]
        if any(np.max(np.abs(wrap_angle(x0 - c))) < dedup_radius for c in coarse):
            continue
        coarse.append(x0)
        if len(coarse) >= keep:
            break
    # one batched sub-grid pass sharpens every peak position
    fine_step = grid_step / 5.0
    offsets = np.arange(-2, 3) * fine_step
    mesh = np.meshgrid(*([offsets] * n_params), indexing="ij")
    local = np.column_stack([g.ravel() for g in mesh])
    sub_points = (np.asarray(coarse)[:, None, :] + local[None, :, :]).reshape(-1, n_params)
    sub_values = _joint_loglik_batch(batches, sub_points).reshape(len(coarse), -1)
    peaks = []
    for k in range(len(coarse)):
        j = int(np.argmax(sub_values[k]))
        peaks.append((np.mod(coarse[k] + local[j], TWO_PI), float(sub_values[k, j])))
    peaks.sort(key=lambda t: -t[1])
    best_value = peaks[0][1]
    return [(x, v) for x, v in peaks if v >= best_value - margin]


@dataclass(frozen=True)
class StepRecord:
    name: str
    psis: np.ndarray
    nu: int
    counts: CountRecord
    posterior: GaussianPrior
    retries: int = 0
    candidates: tuple = ()


@dataclass(frozen=True)
class ProtocolTrace:
    steps: tuple[StepRecord, ...]
    final_estimate: np.ndarray
    final_sigma: np.ndarray
    seed: object
    nu_total: int

    def budgets(self) -> list[int]:
        return [s.nu for s in self.steps]


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything needed to reproduce one adaptive run (modulo the seed)."""

    modes: int  # 3 or 4
    true_phases: tuple[float, float]
    nu: int = 10000
    fractions: tuple[float, ...] = ()
    phi0: float = 0.01
    bound_coeff: float | None = None
    rough_grid_step: float = 0.05
    grid_step: float = 0.02
    refine_tol: float = 1e-5
    max_retries: int = 3

    def __post_init__(self):
        if self.modes not in (3, 4):
            raise ValueError("modes must be 3 or 4")
        fractions = self.fractions or ((0.1, 0.45, 0.45) if self.modes == 3 else (0.1, 0.9))
        object.__setattr__(self, "fractions", tuple(float(f) for f in fractions))
        object.__setattr__(self, "true_phases", tuple(float(x) for x in self.true_phases))
        expected = 3 if self.modes == 3 else 2
        if len(self.fractions) != expected:
            raise ValueError(f"{self.modes}-mode protocol needs {expected} fractions")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")
        if self.bound_coeff is None:
            coeff = THREE_MODE_BOUND_COEFF if self.modes == 3 else FOUR_MODE_BOUND_COEFF
            object.__setattr__(self, "bound_coeff", coeff)

    def interferometer(self) -> Interferometer:
        if self.modes == 3:
            return three_mode_mzi()
        if self.phi0 <= 0:
            raise ValueError(
                "four-mode protocol requires phi0 > 0: at phi0 = 0 the "
                "information matrix is singular at the working point and the "
                "second step cannot converge"
            )
        return four_mode_mzi(self.phi0)

    def probe(self) -> Probe:
        return Probe.fock((1,) * self.modes)

    def targets(self):
        if self.modes == 3:
            return [np.array(p) for p in THREE_MODE_WORKING_POINTS]
        return [np.array(FOUR_MODE_WORKING_POINT) + FOUR_MODE_STEP_OFFSET]

    def phase_group(self):
        group = THREE_MODE_PHASE_GROUP if self.modes == 3 else FOUR_MODE_PHASE_GROUP
        return [np.array(s) for s in group]

    def to_dict(self) -> dict:
        return {
            "modes": self.modes,
            "true_phases": list(self.true_phases),
            "nu": self.nu,
            "fractions": list(self.fractions),
            "phi0": self.phi0,
            "bound_coeff": self.bound_coeff,
            "rough_grid_step": self.rough_grid_step,
            "grid_step": self.grid_step,
            "refine_tol": self.refine_tol,
            "max_retries": self.max_retries,
        }


def _split_budget(nu: int, fractions) -> list[int]:
    raw = [f * nu for f in fractions]
    floors = [int(np.floor(r)) for r in raw]
    remainder = nu - sum(floors)
    order = np.argsort([f - r for f, r in zip(floors, raw)])  # largest residue first
    for idx in order[:remainder]:
        floors[idx] += 1
    return floors


@dataclass
class _Hypothesis:
    """One tracked basin of the multi-peaked likelihood: a running mean and
    width plus the accumulated log-likelihood of all data under it."""

    mean: np.ndarray
    sigma: np.ndarray
    score: float


PRUNE_MARGIN = 60.0  # nats behind the leading hypothesis before dropping


def run_protocol(config: ProtocolConfig, seed) -> ProtocolTrace:
    """One full adaptive run; ``seed`` feeds a fresh numpy Generator.

    Because the rough-circuit likelihood has exactly and nearly degenerate
    images of the truth, the run tracks one hypothesis per rough peak.
    Control phases for each working-point step anchor on the current best
    hypothesis; every hypothesis is refit against each step's counts and
    scored by its accumulated data log-likelihood.  The final estimate
    maximizes the joint likelihood of all steps together, and its width
    comes from the summed per-step information  sum_s nu_s F_s  at the
    estimate (the additivity of the per-step Fisher matrices).
    """
    rng = np.random.default_rng(seed)
    interf = config.interferometer()
    probe = config.probe()
    true = np.mod(np.asarray(config.true_phases, dtype=float), TWO_PI)
    n = len(true)
    budgets = _split_budget(config.nu, config.fractions)
    targets = config.targets()
    steps: list[StepRecord] = []
    collected: list[tuple] = []  # (counts, model) per executed step

    # --- rough step, split over two control settings.  The first half runs
    # with controls at zero; a single setting leaves an order ~18 set of
    # near-tied likelihood images (exact shifts composed with
    # reflection-type maps), so the second half applies controls that steer
    # the crude estimate onto the first working point.  The pair of
    # settings leaves only the exact shift group, and the second half's
    # counts are taken where the circuit is most informative.
    model_a = build_model(interf, probe, psis=np.zeros(n))
    nu_rough = budgets[0]
    nu_a = nu_rough - nu_rough // 2
    nu_b = nu_rough // 2
    remaining = list(budgets[1:])
    retries = 0
    while True:
        batch_a = (sample_outcomes(model_a.distribution(true), nu_a, rng), model_a)
        crude = _likelihood_peaks(
            [batch_a], config.rough_grid_step, config.refine_tol
        )[0][0]
        psis_b = wrap_angle(targets[0] - crude)
        model_b = build_model(interf, probe, psis=psis_b)
        batch_b = (sample_outcomes(model_b.distribution(true), nu_b, rng), model_b)
        rough_batches = [batch_a, batch_b]
        peaks = _likelihood_peaks(
            rough_batches, config.rough_grid_step, config.refine_tol
        )
        rough = peaks[0][0]
        sigma = _joint_sigma(rough_batches, rough)
        if sigma is not None:
            break
        retries += 1
        if retries > config.max_retries or max(remaining) <= nu_rough:
            sigma = _sigma_from_curvature(
                rough_batches[0][0], None, model_a, rough
            )
            break
        # re-draw with budget taken from the largest remaining step
        take = int(np.argmax(remaining))
        remaining[take] -= nu_rough
    collected.extend(rough_batches)
    hypotheses = []
    for position, value in peaks:
        hyp_sigma = _joint_sigma(rough_batches, position)
        hypotheses.append(
            _Hypothesis(
                mean=position,
                sigma=hyp_sigma if hyp_sigma is not None else sigma,
                score=value,
            )
        )
    best = max(hypotheses, key=lambda h: h.score)
    steps.append(
        StepRecord(
            name="rough",
            psis=np.zeros(n),
            nu=nu_rough * (1 + retries),
            counts=rough_batches[0][0],
            posterior=GaussianPrior(best.mean, best.sigma),
            retries=retries,
            candidates=tuple(h.mean for h in hypotheses),
        )
    )

    # --- working-point steps
    anchors = []  # phase value each step's controls map onto its target
    for step_idx, (target, nu_step) in enumerate(zip(targets, remaining)):
        psis = wrap_angle(target - best.mean)
        anchors.append(np.array(best.mean, dtype=float))
        model = build_model(interf, probe, psis=psis)
        dist = model.distribution(true)
        counts = sample_outcomes(dist, nu_step, rng)
        collected.append((counts, model))

        # one batched pass scores all hypothesis windows; only windows whose
        # grid peak is competitive earn a simplex polish and a FIM call
        window_peaks = []
        for hyp in hypotheses:
            step = min(config.grid_step, float(np.min(hyp.sigma)) / 2.0)
            half = 5.0 * hyp.sigma
            axes = [np.arange(-h, h + step / 2, step) for h in half]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.column_stack([g.ravel() for g in mesh]) + hyp.mean
            values = _data_loglik_batch(counts, model, pts)
            j = int(np.argmax(values))
            window_peaks.append((float(values[j]), pts[j]))
        lead = max(v for v, _ in window_peaks)
        for hyp, (grid_value, x0) in zip(hypotheses, window_peaks):
            prior = GaussianPrior(hyp.mean, hyp.sigma)
            if grid_value < lead - PRUNE_MARGIN:
                hyp.mean = np.mod(x0, TWO_PI)
                hyp.score += grid_value + prior.log_density(x0)
                continue
            x, value = _refine(counts, prior, model, x0, config.refine_tol)
            precision = np.diag(1.0 / hyp.sigma**2)
            try:
                fim = fisher_matrix(model.distribution(np.mod(x, TWO_PI))).matrix
                cov = np.linalg.inv(precision + nu_step * fim)
                sigma_post = np.sqrt(np.clip(np.diag(cov), 1e-18, None))
            except SingularSupportError:
                sigma_post = hyp.sigma / np.sqrt(1.0 + nu_step / counts.total)
            hyp.mean = np.mod(x, TWO_PI)
            hyp.sigma = sigma_post
            hyp.score += value
        top = max(h.score for h in hypotheses)
        hypotheses = [h for h in hypotheses if h.score >= top - PRUNE_MARGIN]
        best = max(hypotheses, key=lambda h: h.score)
        steps.append(
            StepRecord(
                name=f"working-point-{step_idx + 1}",
                psis=psis,
                nu=nu_step,
                counts=counts,
                posterior=GaussianPrior(best.mean, best.sigma),
                candidates=tuple(h.mean for h in hypotheses),
            )
        )

    final_estimate, final_sigma = _joint_refit(
        collected, hypotheses, anchors, config.refine_tol
    )
    return ProtocolTrace(
        steps=tuple(steps),
        final_estimate=final_estimate,
        final_sigma=final_sigma,
        seed=seed,
        nu_total=int(sum(s.nu for s in steps)),
    )


def _joint_loglik_batch(collected, points: np.ndarray) -> np.ndarray:
    total = np.zeros(len(points))
    for counts, model in collected:
        total += _data_loglik_batch(counts, model, points)
    return total


def _joint_refit(collected, hypotheses, anchors, refine_tol):
    """Maximize the joint likelihood of every step's counts.

    Each surviving hypothesis seeds a local grid; so does its reflection
    through every step's anchor point, because near a working point the
    outcome distribution is almost even around the anchor and a single
    step can leave the fit on the wrong side.  The joint likelihood of all
    steps breaks those ties.  The best few seeds get a simplex polish and
    the final width comes from the summed per-step information
    sum_s nu_s F_s at the winner.
    """
    n = len(hypotheses[0].mean)
    centers = []
    for hyp in hypotheses:
        centers.append((hyp.mean, hyp.sigma))
        for anchor in anchors:
            centers.append((2.0 * anchor - hyp.mean, hyp.sigma))
    seeds = []
    for mean, sigma in centers:
        half = 5.0 * sigma
        step = np.maximum(sigma / 2.0, 1e-6)
        axes = [np.arange(-h, h + s / 2, s) for h, s in zip(half, step)]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.column_stack([g.ravel() for g in mesh]) + mean
        values = _joint_loglik_batch(collected, points)
        shape = [len(a) for a in axes]
        grid = values.reshape(shape)
        is_max = np.ones(shape, dtype=bool)
        for shifts in np.ndindex(*([3] * n)):
            if all(s == 1 for s in shifts):
                continue
            rolled = grid
            for ax, s in enumerate(shifts):
                rolled = np.roll(rolled, s - 1, axis=ax)
            is_max &= grid >= rolled
        flat = np.flatnonzero(is_max.ravel())
        top = flat[np.argsort(values[flat])[::-1][:3]]
        for idx in top:
            seeds.append((points[idx], values[idx]))
    seeds.sort(key=lambda t: -t[1])
    best_x, best_value = None, -np.inf
    for x0, value in seeds[:8]:
        if value < seeds[0][1] - 40.0:
            break
        result = minimize(
            lambda x: -_joint_loglik_batch(collected, x[None, :])[0],
            x0,
            method="Nelder-Mead",
            options={"xatol": refine_tol, "fatol": 1e-10, "maxiter": 400},
        )
        if -result.fun > best_value:
            best_value, best_x = -result.fun, result.x
    estimate = np.mod(best_x, TWO_PI)
    info = np.zeros((n, n))
    for counts, model in collected:
        try:
            info += counts.total * fisher_matrix(model.distribution(estimate)).matrix
        except SingularSupportError:
            continue
    try:
        cov = np.linalg.inv(info)
        sigma = np.sqrt(np.clip(np.diag(cov), 1e-18, None))
    except np.linalg.LinAlgError:
        sigma = np.full(n, np.nan)
    return estimate, sigma


def run_adaptive_three_mode(true_phases, nu: int = 10000,
                            fractions=(0.1, 0.45, 0.45), seed=None,
                            **kwargs) -> ProtocolTrace:
    """Three-step protocol: rough estimate, then both mirror working points."""
    config = ProtocolConfig(modes=3, true_phases=tuple(true_phases), nu=nu,
                            fractions=tuple(fractions), **kwargs)
    return run_protocol(config, seed)


def run_adaptive_four_mode(true_phases, phi0: float = 0.01, nu: int = 10000,
                           fractions=(0.1, 0.9), seed=None, **kwargs) -> ProtocolTrace:
    """Two-step protocol: rough estimate, then the working region near [pi, pi]."""
    config = ProtocolConfig(modes=4, true_phases=tuple(true_phases), nu=nu,
                            fractions=tuple(fractions), phi0=phi0, **kwargs)
    return run_protocol(config, seed)


def derive_seeds(master_seed, repetitions: int) -> list[int]:
    """Per-repetition seeds: the first ``repetitions`` 64-bit words of
    SeedSequence(master_seed)."""
    words = np.random.SeedSequence(master_seed).generate_state(repetitions, dtype=np.uint64)
    return [int(w) for w in words]


def quotient_errors(estimates: np.ndarray, true_phases, group) -> np.ndarray:
    """Wrapped estimation errors modulo the phase-indistinguishability group.

    For each estimate the group image with the smallest wrapped distance to
    the true phases is selected; statistics on these errors measure the
    estimator on the physically identifiable quotient of the torus.
    """
    true = np.asarray(true_phases, dtype=float)
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    candidates = np.stack(
        [wrap_angle(estimates + np.asarray(shift) - true) for shift in group]
    )  # [n_group, n_reps, n_params]
    norms = np.max(np.abs(candidates), axis=2)
    best = np.argmin(norms, axis=0)
    return candidates[best, np.arange(estimates.shape[0])]


@dataclass(frozen=True)
class MonteCarloStats:
    repetitions: int
    std: np.ndarray            # circular std of the final estimates, radians
    bias: np.ndarray           # mean wrapped deviation from the true phases
    bound: np.ndarray          # configured bound coeff / sqrt(nu)
    ratio: np.ndarray          # std / bound
    predicted_sigma: np.ndarray  # mean per-run width from summed information
    estimates: np.ndarray = field(repr=False)
    config: ProtocolConfig = field(repr=False, default=None)
    master_seed: object = None


def monte_carlo(config: ProtocolConfig, repetitions: int, master_seed,
                out_path=None) -> MonteCarloStats:
    """Repeat the protocol with derived per-repetition seeds and summarize.

    Statistics are computed on the identifiable quotient: each estimate is
    mapped to its phase-group image nearest the true phases and the wrapped
    deviations give bias (vs truth) and std.  Writes a JSON run-record when
    ``out_path`` is given.
    """
    if repetitions < 2:
        raise ValueError("need repetitions >= 2")
    seeds = derive_seeds(master_seed, repetitions)
    estimates = np.empty((repetitions, len(config.true_phases)))
    sigmas = np.empty_like(estimates)
    for r, seed in enumerate(seeds):
        trace = run_protocol(config, seed)
        estimates[r] = trace.final_estimate
        sigmas[r] = trace.final_sigma
    errors = quotient_errors(estimates, config.true_phases, config.phase_group())
    bias = errors.mean(axis=0)
    std = errors.std(axis=0, ddof=1)
    bound = config.bound_coeff / np.sqrt(config.nu) * np.ones_like(std)
    stats = MonteCarloStats(
        repetitions=repetitions,
        std=std,
        bias=bias,
        bound=bound,
        ratio=std / bound,
        predicted_sigma=sigmas.mean(axis=0),
        estimates=estimates,
        config=config,
        master_seed=master_seed,
    )
    if out_path is not None:
        write_run_record(stats, out_path)
    return stats


def run_record_dict(stats: MonteCarloStats) -> dict:
    import datetime

    return {
        "schema_version": RUN_RECORD_SCHEMA_VERSION,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": stats.config.to_dict(),
        "master_seed": stats.master_seed,
        "repetitions": stats.repetitions,
        "estimates": [[float(x) for x in row] for row in stats.estimates],
        "summary": {
            "std": [float(x) for x in stats.std],
            "bias": [float(x) for x in stats.bias],
            "bound": [float(x) for x in stats.bound],
            "ratio": [float(x) for x in stats.ratio],
            "std_sqrt_nu": [float(x * np.sqrt(stats.config.nu)) for x in stats.std],
            "predicted_sigma": [float(x) for x in stats.predicted_sigma],
        },
    }


def write_run_record(stats: MonteCarloStats, path) -> None:
    with open(path, "w") as handle:
        json.dump(run_record_dict(stats), handle, indent=2, sort_keys=True)
        handle.write("\n")
