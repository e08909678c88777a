"""Synthetic datasets with a known three-component common structure.

Predictors are unit-variance random mixes of four orthogonal latent columns
with standard deviations sigma1..sigma4; the response depends on the first three latent
columns only, with noise of standard deviation sigma5 added on the link scale.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .criteria import CriterionSpec, run_criterion
from .errors import PlsStopError
from .evaluation import missclassed_count, nmse
from .glm import inv_logit
from .pls import ComponentPath, Dataset, predict

log = logging.getLogger(__name__)

POISSON_LINK_SD = 1.727
TRUE_K = 3


@dataclass(frozen=True)
class SimConfig:
    n: int = 200
    p_range: tuple = (7, 50)
    sigma: tuple = (10.0, 8.0, 6.0, 0.01, 0.01)
    family: str = "gaussian"
    datasets_per_cell: int = 20
    seed: int = 0
    test_rows: int | None = None

    def __post_init__(self):
        s = tuple(float(v) for v in self.sigma)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "p_range", tuple(int(v) for v in self.p_range))
        if len(s) != 5 or min(s) < 0:
            raise ValueError("sigma must hold five non-negative values")
        if not s[0] >= s[1] >= s[2] > 0:
            raise ValueError("need sigma1 >= sigma2 >= sigma3 > 0")
        lo, hi = self.p_range
        if not 1 <= lo <= hi:
            raise ValueError(f"invalid p range {self.p_range}")
        if self.family not in ("gaussian", "binomial", "poisson"):
            raise ValueError(f"unknown family {self.family!r}")

    @classmethod
    def n_greater_p(cls, **kw) -> "SimConfig":
        return cls(n=200, p_range=(7, 50), **kw)

    @classmethod
    def n_less_p(cls, **kw) -> "SimConfig":
        return cls(n=20, p_range=(25, 50), **kw)

    def with_noise(self, sigma4: float, sigma5: float) -> "SimConfig":
        return replace(self, sigma=self.sigma[:3] + (float(sigma4), float(sigma5)))

    @property
    def default_test_rows(self) -> int:
        if self.test_rows is not None:
            return self.test_rows
        return 100 if self.n > self.p_range[1] else 80

    @property
    def link_scale(self) -> float:
        """Multiplier on the latent signal; fixed so poisson log-means have sd 1.727."""
        if self.family != "poisson":
            return 1.0
        return POISSON_LINK_SD / float(np.sqrt(np.sum(np.square(self.sigma[:3]))))


@dataclass
class SimulatedDataset:
    data: Dataset
    latent: np.ndarray
    p_drawn: int
    mixing: np.ndarray
    true_k: int = TRUE_K
    test_extension: Dataset | None = None
    params: dict = field(default_factory=dict)


def _rng(*keys) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in keys])))


def _orthogonal_latent(rng: np.random.Generator, n: int, sds: np.ndarray) -> np.ndarray:
    Z = rng.standard_normal((n, 4))
    Z -= Z.mean(axis=0)
    Q, R = np.linalg.qr(Z)
    Q *= np.sign(np.diag(R))
    # unit-norm centered columns have sample sd 1/sqrt(n-1)
    return Q * np.sqrt(n - 1) * sds


def _mixing(rng: np.random.Generator, p: int, sds: np.ndarray) -> np.ndarray:
    """4 x p mixing weights giving unit-variance predictors.

    Columns come in pairs sharing one random informative mix and carrying
    opposite loadings on the fourth latent column (an odd p leaves one column
    without it). The fourth row is therefore orthogonal to the first three,
    which keeps the fourth latent direction out of the first three PLS
    components after standardization.
    """
    m = (p + 1) // 2
    A = rng.standard_normal((3, m))
    v = rng.standard_normal(m)
    M = np.empty((4, p))
    M[:3, 0::2] = A
    M[:3, 1::2] = A[:, : p // 2]
    M[3, 0::2] = v
    M[3, 1::2] = -v[: p // 2]
    if p % 2:
        M[3, -1] = 0.0
    M /= np.sqrt((sds**2) @ M**2)
    return M[:, rng.permutation(p)]


def _response(rng: np.random.Generator, eta: np.ndarray, cfg: SimConfig) -> np.ndarray:
    noise = rng.normal(0.0, cfg.sigma[4], size=eta.shape[0]) if cfg.sigma[4] > 0 else 0.0
    if cfg.family == "gaussian":
        return eta + noise
    if cfg.family == "binomial":
        return (rng.random(eta.shape[0]) < inv_logit(eta + noise)).astype(float)
    return rng.poisson(np.exp(np.clip(cfg.link_scale * eta + noise, -30, 30))).astype(float)


def simulate_univ_yx(config: SimConfig, cell_replicate: int = 0, stream: int = 0, p: int | None = None) -> SimulatedDataset:
    """Generate one dataset.

    Randomness comes from ``SeedSequence([config.seed, stream, cell_replicate])``;
    ``stream`` lets grid runs give every couple its own sub-seeds. ``p`` fixes
    the predictor count instead of drawing it from ``config.p_range``.
    """
    rng = _rng(config.seed, stream, cell_replicate)
    lo, hi = config.p_range
    p_drawn = int(rng.integers(lo, hi + 1)) if p is None else int(p)
    sds = np.asarray(config.sigma[:4])
    n = config.n
    latent = _orthogonal_latent(rng, n, sds)
    M = _mixing(rng, p_drawn, sds)
    X = latent @ M
    eta = latent[:, :3].sum(axis=1)
    y = _response(rng, eta, config)

    test = None
    m = config.default_test_rows
    if m > 0:
        lat_t = rng.standard_normal((m, 4)) * sds
        y_t = _response(rng, lat_t[:, :3].sum(axis=1), config)
        test = Dataset(lat_t @ M, y_t, config.family)
    names = tuple(f"x{j + 1}" for j in range(p_drawn))
    params = {"seed": config.seed, "stream": stream, "replicate": cell_replicate,
              "n": n, "p": p_drawn, "family": config.family,
              "sigma": list(config.sigma), "link_scale": config.link_scale,
              "eta_weights": [1.0, 1.0, 1.0]}
    return SimulatedDataset(
        data=Dataset(X, y, config.family, names),
        latent=latent,
        p_drawn=p_drawn,
        mixing=M,
        test_extension=test,
        params=params,
    )


def frange(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid rounded to 10 decimals."""
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def paper_grid(name: str) -> list[tuple[float, float]]:
    """Noise couples (sigma4, sigma5) of the gaussian n>p study: sets "A" or "B"."""
    s5 = frange(0.01, 20.01, 0.5)
    s4 = frange(0.01, 5.81, 0.2)
    if name.upper() == "A":
        s4 = s4 + frange(6.01, 30.01, 1.0)
    elif name.upper() != "B":
        raise ValueError(f"unknown grid {name!r}")
    return [(a, b) for a in s4 for b in s5]


GRID_COLUMNS = ("couple_sigma4", "couple_sigma5", "replicate", "criterion", "K",
                "nmse_train", "nmse_test", "missclassed_test", "runtime_ms", "error")


def _evaluate(sim: SimulatedDataset, K: int) -> dict:
    data = sim.data
    model = ComponentPath(data).model(K)
    y_mean = float(data.y.mean())
    out = {"nmse_train": nmse(data.y, predict(model, data.X), y_mean)}
    test = sim.test_extension
    if test is not None:
        pred = predict(model, test.X)
        out["nmse_test"] = nmse(test.y, pred, y_mean)
        if data.family == "binomial":
            out["missclassed_test"] = missclassed_count(test.y, pred)
    return out


def _cell(args) -> list[dict]:
    ci, (s4, s5), template, specs, seed, record_runtime = args
    rows = []
    cfg = replace(template.with_noise(s4, s5), seed=seed)
    for rep in range(template.datasets_per_cell):
        base = {"couple_sigma4": s4, "couple_sigma5": s5, "replicate": rep}
        try:
            sim = simulate_univ_yx(cfg, rep, stream=ci)
        except PlsStopError as exc:
            for spec in specs:
                rows.append({**base, "criterion": spec.label, "error": f"{type(exc).__name__}: {exc}"})
            continue
        crit_seed = int(np.random.SeedSequence([seed, ci, rep]).generate_state(1)[0])
        for spec in specs:
            row = {**base, "criterion": spec.label}
            t0 = time.perf_counter()
            try:
                res = run_criterion(spec, sim.data, crit_seed)
                row["K"] = res.K
                row.update(_evaluate(sim, res.K))
            except (PlsStopError, ValueError, np.linalg.LinAlgError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            if record_runtime:
                row["runtime_ms"] = round(1000.0 * (time.perf_counter() - t0), 3)
            rows.append(row)
    log.info("cell %d (sigma4=%g, sigma5=%g) done", ci, s4, s5)
    return rows


def grid_run(
    grid,
    template: SimConfig,
    criteria_list,
    seed: int = 0,
    jobs: int = 1,
    record_runtime: bool = False,
) -> list[dict]:
    """Run every criterion on every simulated dataset of every noise couple.

    Rows come back ordered by (couple, replicate, criterion) whatever ``jobs``
    is. Failures become rows with an ``error`` entry.
    """
    grid = list(grid)
    specs = [s if isinstance(s, CriterionSpec) else CriterionSpec(s) for s in criteria_list]
    if not grid or not specs:
        raise ValueError("grid and criteria list must be non-empty")
    tasks = [(ci, tuple(c), template, specs, seed, record_runtime) for ci, c in enumerate(grid)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell, tasks))
    else:
        results = [_cell(t) for t in tasks]
    return [row for cell in results for row in cell]


def config_dict(template: SimConfig) -> dict:
    d = asdict(template)
    d["link_scale"] = template.link_scale
    return d
