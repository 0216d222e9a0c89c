"""Training loop, evaluation and experiment drivers for the Sudoku domain.

One gradient step per sample: forward the shared pair features through the
MLP, assemble the predicted network, compute the chosen loss plus L1 on the
predicted matrices, backpropagate into the parameters and apply Adam.
"""

import copy
import csv
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .network import CostFunctionNetwork
from .solver import SolverConfig, solve, enumerate_solutions
from .losses import sample_mask, hinge
from .mlp import MlpConfig, ParamStore, forward, backward, adam_step
from . import sudoku

LOSSES = ("npll", "masked-npll", "hinge")


@dataclass
class TrainConfig:
    size: int = 4
    loss: str = "masked-npll"
    k: int = 3                     # muted messages per variable (masked-npll)
    mask_mode: str = "count"       # or "fraction" (k is a percentage)
    lr: float = 1e-3
    anneal_epoch: int | None = None  # start multiplying lr by anneal_factor
    anneal_factor: float = 0.95
    weight_decay: float = 1e-4
    decoupled_weight_decay: bool = True
    l1_lambda: float = 2e-4
    l1_lambda_diag: float | None = None  # None = same as l1_lambda
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    hinge_margin: float = 1.0
    hinge_floor: int | None = None  # initial free-variable count; None = default
    hinge_floor_step: int = 2
    include_hint_terms: bool = True
    hidden_width: int = 128
    hidden_layers: int = 10
    residual_period: int = 2
    val_every: int | None = None    # None = 1 for 4x4, 5 for 9x9
    train_node_limit: int = 2_000_000
    eval_node_limit: int = 2_000_000
    val_node_limit: int = 20_000   # per-grid cap for in-training validation
    deterministic: bool = True

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")

    def mlp_config(self):
        return MlpConfig(input_dim=6 * self.size,
                         output_dim=self.size * self.size,
                         hidden_width=self.hidden_width,
                         hidden_layers=self.hidden_layers,
                         residual_period=self.residual_period)


@dataclass
class EvalReport:
    grids_total: int
    grids_solved: int
    outcomes: list = field(default_factory=list)  # per grid: dict
    wall_clock: float = 0.0

    @property
    def accuracy(self):
        return self.grids_solved / self.grids_total if self.grids_total else 0.0


def predict_pair_matrices(store: ParamStore, size):
    """Forward the (fixed) geometry features: dict pair -> (d, d) matrix,
    plus the raw batched output and cache for backprop."""
    pairs, X = sudoku.pair_features(size)
    out, cache = forward(store, X)
    mats = out.reshape(len(pairs), size, size)
    return pairs, mats, out, cache


def assemble_network(size, pairs, mats) -> CostFunctionNetwork:
    net = CostFunctionNetwork([size] * (size * size))
    for k, (i, j) in enumerate(pairs):
        net.add_pair(i, j, mats[k])
    return net


def _pll_sample_grad(pairs, mats, y, masks, terms, d, n):
    """Fast path of losses.masked_npll for a pure pairwise predicted net:
    returns (value, upstream (P, d, d))."""
    m = np.zeros((n, d))
    use = np.ones((n, n), dtype=bool)
    if masks is not None:
        for i, mi in enumerate(masks):
            for j in mi:
                use[i, j] = False
    for k, (i, j) in enumerate(pairs):
        if use[i, j]:
            m[i] += mats[k][:, y[j]]
        if use[j, i]:
            m[j] += mats[k][y[i], :]
    mmin = m.min(axis=1)
    e = np.exp(-(m - mmin[:, None]))
    z = e.sum(axis=1)
    probs = e / z[:, None]
    idx = np.arange(n)
    term_vals = m[idx, y] - mmin + np.log(z)
    included = np.ones(n, dtype=bool)
    if terms is not None:
        included[:] = False
        included[list(terms)] = True
    value = float(term_vals[included].sum())
    grad = np.zeros_like(mats)
    for k, (i, j) in enumerate(pairs):
        g = grad[k]
        if use[i, j] and included[i]:
            g[y[i], y[j]] += 1.0
            g[:, y[j]] -= probs[i]
        if use[j, i] and included[j]:
            g[y[i], y[j]] += 1.0
            g[y[i], :] -= probs[j]
    return value, grad


def _curriculum_evidence(sample, y, epoch, cfg, rng):
    """Hinge training evidence: the sample's hints plus extra cells revealed
    from y, leaving at most floor + step*epoch variables free."""
    n = cfg.size * cfg.size
    floor = cfg.hinge_floor if cfg.hinge_floor is not None else \
        (8 if cfg.size == 4 else 20)
    free_target = min(n - sample.hint_count, floor + cfg.hinge_floor_step * epoch)
    evidence = dict(sample.hints)
    candidates = [i for i in range(n) if i not in evidence]
    rng.shuffle(candidates)
    for cell in candidates[:len(candidates) - free_target]:
        evidence[cell] = y[cell]
    return evidence


def train(cfg: TrainConfig, train_samples, val_samples):
    """Returns (best ParamStore, log).  Early-stops on validation grid
    accuracy; the returned parameters are the best-validation snapshot."""
    if not train_samples:
        raise ValueError("empty training set")
    size = cfg.size
    n, d = size * size, size
    pairs, X = sudoku.pair_features(size)
    store = ParamStore(cfg.mlp_config(), np.random.default_rng([cfg.seed, 0]))
    val_every = cfg.val_every if cfg.val_every is not None else \
        (1 if size == 4 else 5)
    solver_cfg = SolverConfig(node_limit=cfg.train_node_limit,
                              variable_order="min-domain-then-index")

    log = []
    best = {"acc": -1.0, "store": copy.deepcopy(store), "stall": 0, "epochs": 0}
    lr = cfg.lr
    for epoch in range(cfg.max_epochs):
        t0 = time.perf_counter()
        if cfg.anneal_epoch is not None and epoch >= cfg.anneal_epoch:
            lr = max(lr * cfg.anneal_factor, 1e-8)
        order = np.arange(len(train_samples))
        np.random.default_rng([cfg.seed, 1, epoch]).shuffle(order)
        epoch_loss = 0.0
        for sample_idx in order:
            sample = train_samples[sample_idx]
            sols = sample.solutions[:5]
            pick = 0 if len(sols) == 1 else int(
                np.random.default_rng(
                    [cfg.seed, 2, epoch, int(sample_idx)]).integers(len(sols)))
            y = np.asarray(sols[pick], dtype=int)

            out, cache = forward(store, X)
            mats = out.reshape(len(pairs), d, d)
            terms = None
            if not cfg.include_hint_terms:
                terms = [i for i in range(n) if i not in sample.hints]
            if cfg.loss == "hinge":
                net = assemble_network(size, pairs, mats)
                rng = np.random.default_rng([cfg.seed, 3, epoch, int(sample_idx)])
                evidence = _curriculum_evidence(sample, y, epoch, cfg, rng)
                report = hinge(net.condition(evidence), y, cfg.hinge_margin,
                               solver_cfg)
                value = report.value
                grad = np.stack([report.grad_pairs[p] for p in pairs])
            else:
                masks = None
                if cfg.loss == "masked-npll":
                    masks = sample_mask(n, cfg.k, cfg.seed, epoch,
                                        int(sample_idx), cfg.mask_mode).masks
                value, grad = _pll_sample_grad(pairs, mats, y, masks, terms, d, n)
            # heavier shrinkage off the diagonal sharpens the learned rule
            # matrices without suppressing the (redundant) diagonal costs
            lam = np.full((d, d), cfg.l1_lambda)
            if cfg.l1_lambda_diag is not None:
                np.fill_diagonal(lam, cfg.l1_lambda_diag)
            value += float((lam * np.abs(mats)).sum())
            grad = grad + lam * np.sign(mats)
            if not np.isfinite(value):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, sample {sample_idx}: "
                    f"hints={sample.hints}")
            epoch_loss += value
            grads = backward(store, cache, grad.reshape(len(pairs), d * d))
            adam_step(store, grads, lr=lr,
                      weight_decay=cfg.weight_decay,
                      decoupled=cfg.decoupled_weight_decay)

        entry = {"epoch": epoch, "loss": epoch_loss / len(train_samples),
                 "lr": lr, "val_accuracy": None, "wall_clock": 0.0}
        best["epochs"] = epoch + 1
        if val_samples and (epoch + 1) % val_every == 0:
            val_cfg = copy.deepcopy(cfg)
            val_cfg.eval_node_limit = cfg.val_node_limit
            acc = evaluate(store, val_samples, mode="single", cfg=val_cfg).accuracy
            entry["val_accuracy"] = acc
            if acc > best["acc"]:
                best["acc"] = acc
                best["store"] = copy.deepcopy(store)
                best["stall"] = 0
            else:
                # ties keep the latest snapshot so L1 keeps sharpening the
                # matrices, but still count toward the patience budget
                if acc == best["acc"]:
                    best["store"] = copy.deepcopy(store)
                best["stall"] += val_every
        if not cfg.deterministic:
            entry["wall_clock"] = time.perf_counter() - t0
        log.append(entry)
        if val_samples and best["stall"] >= cfg.patience:
            break
    if best["acc"] < 0:  # never validated
        best["store"] = store
    return best["store"], log


def evaluate(store: ParamStore, samples, mode="single",
             cfg: TrainConfig | None = None) -> EvalReport:
    """Predict once (the geometry is shared), then condition on each grid's
    hints and solve exactly.  `single` requires the stored solution;
    `any-of-known` accepts membership in the stored solution set."""
    if mode not in ("single", "any-of-known"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    if cfg is None:
        cfg = TrainConfig(size=int(round(np.sqrt(store.config.output_dim))))
    size = cfg.size
    pairs, X = sudoku.pair_features(size)
    out, _ = forward(store, X)
    mats = out.reshape(len(pairs), size, size)
    net = assemble_network(size, pairs, mats)
    t0 = time.perf_counter()
    report = EvalReport(grids_total=len(samples), grids_solved=0)
    scfg = SolverConfig(node_limit=cfg.eval_node_limit,
                        variable_order="min-domain-then-index")
    for sample in samples:
        res = solve(net.condition(sample.hints), scfg)
        outcome = {"hints": sample.hint_count, "solved": False,
                   "node_limited": not res.proven_optimal}
        if res.best is not None and res.proven_optimal:
            if mode == "single":
                outcome["solved"] = tuple(res.best) == tuple(sample.solutions[0])
            else:
                outcome["solved"] = tuple(res.best) in {tuple(s)
                                                        for s in sample.solutions}
        report.grids_solved += int(outcome["solved"])
        report.outcomes.append(outcome)
    report.wall_clock = 0.0 if cfg.deterministic else time.perf_counter() - t0
    return report


def sweep_k(cfg: TrainConfig, k_values, seeds, train_samples, val_samples,
            test_samples, csv_path=None):
    """Train per (k, seed) and report epochs, wall-clock and whether the run
    reached 100% test accuracy.  Individual failures are recorded, not fatal."""
    rows = []
    for k in k_values:
        for seed in seeds:
            run_cfg = copy.deepcopy(cfg)
            run_cfg.k = k
            run_cfg.seed = seed
            run_cfg.loss = "npll" if k == 0 else "masked-npll"
            row = {"k": k, "seed": seed, "epochs": None, "wall_clock": None,
                   "test_accuracy": None, "solved": False, "error": ""}
            try:
                t0 = time.perf_counter()
                store, log = train(run_cfg, train_samples, val_samples)
                row["epochs"] = len(log)
                row["wall_clock"] = 0.0 if cfg.deterministic \
                    else time.perf_counter() - t0
                acc = evaluate(store, test_samples, mode="single",
                               cfg=run_cfg).accuracy
                row["test_accuracy"] = acc
                row["solved"] = acc >= 1.0
            except Exception as exc:  # keep sweeping
                row["error"] = str(exc)
            rows.append(row)
    if csv_path:
        with open(csv_path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            w.writeheader()
            w.writerows(rows)
    return rows


def summarize_sweep(rows):
    """Per-k aggregate: number of runs and fraction reaching 100%."""
    out = {}
    for row in rows:
        agg = out.setdefault(row["k"], {"runs": 0, "solved": 0})
        agg["runs"] += 1
        agg["solved"] += int(row["solved"])
    return {k: {"runs": a["runs"], "solved": a["solved"],
                "fraction_solved": a["solved"] / a["runs"]}
            for k, a in out.items()}


def enumerate_learned(store: ParamStore, sample, tau, cfg: TrainConfig | None = None,
                      max_solutions=100000):
    """Threshold the predicted network to hard constraints, condition on the
    sample's hints, enumerate, and compare against the true rules' solutions."""
    if cfg is None:
        cfg = TrainConfig(size=int(round(np.sqrt(store.config.output_dim))))
    size = cfg.size
    pairs, X = sudoku.pair_features(size)
    out, _ = forward(store, X)
    net = assemble_network(size, pairs, out.reshape(len(pairs), size, size))
    hard = net.threshold_to_boolean(tau).condition(sample.hints)
    scfg = SolverConfig(enumeration_bound=0.0, max_solutions=max_solutions,
                        variable_order="min-domain-then-index")
    learned = enumerate_solutions(hard, scfg)
    truth = enumerate_solutions(
        sudoku.true_rules(size).condition(sample.hints), scfg)
    learned_set = {sol for sol, _ in learned.solutions}
    truth_set = {sol for sol, _ in truth.solutions}
    return {
        "equal": learned_set == truth_set and not learned.truncated,
        "missing": sorted(truth_set - learned_set),
        "extra": sorted(learned_set - truth_set),
        "truncated": learned.truncated or truth.truncated,
        "learned_count": len(learned_set),
        "true_count": len(truth_set),
    }


def learned_rule_report(store: ParamStore, size, tau_on=1.0, tau_off=0.1):
    pairs, X = sudoku.pair_features(size)
    out, _ = forward(store, X)
    mats = out.reshape(len(pairs), size, size)
    return sudoku.analyze_rules(size, {p: mats[k] for k, p in enumerate(pairs)},
                                tau_on=tau_on, tau_off=tau_off)
