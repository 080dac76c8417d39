"""Experiment runners behind the CLI.

Every runner takes an :class:`ExperimentConfig` and an output directory and
writes plain CSV/JSON artifacts there. Runs are reproducible: all randomness
is derived from ``cfg.seed``, and parallel work is gathered in input order.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from gtcnn.config import ExperimentConfig, Task, product_spec_for
from gtcnn.datasets import GeneratedData, gen_diffusion_forecasting, gen_source_localization
from gtcnn.errors import DegenerateError, TrainingDivergedError
from gtcnn.graphs import line_graph
from gtcnn.models import Graph, PerturbationReport
from gtcnn.nn.metrics import Metric
from gtcnn.nn.model import (
    Architecture,
    GTCNNConfig,
    GTCNNModel,
    ProductMode,
    Readout,
    embed,
    init_model,
    network_inputs,
)
from gtcnn.nn.training import Dataset, evaluate, split_dataset, train
from gtcnn.perturbation import (
    StabilityProbe,
    linear_fit_r2,
    relative_nmse,
    relative_perturb,
    sample_error_at_epsilon,
    sample_error_at_snr,
    scale_error,
)
from gtcnn.serialization import (
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
    save_dataset,
    save_graph,
    write_csv,
    write_history_csv,
    write_json,
    write_reports_csv,
)
from gtcnn.spectral import normalize_response, response_grid, spectral_range, temporal_frequencies
from gtcnn.utils import DEFAULT_FLOAT_DIGITS, derive_seeds, run_ordered

logger = logging.getLogger(__name__)


def variant_config(cfg: ExperimentConfig, variant: str, n_temporal: int) -> GTCNNConfig:
    """Network configuration of one experiment variant.

    ``gcnn`` folds the T time steps into input features; ``joint`` learns the
    full grid of joint taps; the product variants learn a polynomial in a
    product graph, whose scalars are learned for ``parametric``. Source
    localization reads out per community or over all nodes, following
    ``cfg.model.pooling``.
    """
    m = cfg.model
    k_bar, k_tilde = m.orders
    layers = len(m.hidden)
    if cfg.task is Task.FORECASTING:
        head = dict(outputs=1, readout=Readout.REGRESSION)
    elif m.pooling == "community":
        # SBM nodes belong to community i mod C
        communities = tuple(int(c) for c in np.arange(cfg.graph.n) % cfg.graph.communities)
        head = dict(outputs=cfg.graph.communities, readout=Readout.COMMUNITY, communities=communities)
    else:
        head = dict(outputs=cfg.graph.communities, readout=Readout.CLASSIFICATION)
    common = dict(
        **head,
        relu_last=m.relu_last,
        l1_weight=m.l1_weight,
    )
    if variant == "gcnn":
        return GTCNNConfig(
            features=(n_temporal,) + m.hidden,
            orders=((k_bar, 0),) * layers,
            architecture=Architecture.GCNN,
            **common,
        )
    if variant == "joint":
        return GTCNNConfig(features=(1,) + m.hidden, orders=((k_bar, k_tilde),) * layers, **common)
    return GTCNNConfig(
        features=(1,) + m.hidden,
        orders=((k_bar, 0),) * layers,
        product_mode=ProductMode.PRODUCT,
        product=product_spec_for(variant),
        **common,
    )


@dataclass
class RunResult:
    variant: str
    repeat: int
    seed: int
    metrics: dict[str, float]
    failure: str | None = None
    epoch: int | None = None
    batch: int | None = None


def _test_metrics(model: GTCNNModel, data: GeneratedData, test: Dataset, task: Task) -> dict[str, float]:
    if len(test) == 0:
        return {}
    if task is Task.FORECASTING:
        out = {}
        for metric in (Metric.MAE, Metric.RMSE, Metric.MAPE):
            try:
                out[metric.value] = evaluate(model, data.spatial, data.temporal, test, metric)
            except DegenerateError as exc:
                logger.warning("%s", exc)
                out[metric.value] = float("nan")
        return out
    return {"accuracy": evaluate(model, data.spatial, data.temporal, test, Metric.ACCURACY)}


def _generate(cfg: ExperimentConfig, spatial: Graph | None = None) -> GeneratedData:
    if cfg.task is Task.FORECASTING:
        return gen_diffusion_forecasting(cfg, spatial)
    return gen_source_localization(cfg, spatial)


def _checkpoint_path(out_dir: Path, variant: str, repeat: int) -> Path:
    return out_dir / "checkpoints" / f"{variant}_seed{repeat}.json"


def train_variant(
    cfg: ExperimentConfig,
    data: GeneratedData,
    variant: str,
    repeat: int,
    seed: int,
    out_dir: Path,
    data_seed: int | None = None,
) -> RunResult:
    """Train one variant on one dataset; a diverged run is recorded, not raised.

    The checkpoint records ``data_seed`` so the stability sweeps can
    regenerate the exact test split the model was evaluated on.
    """
    net = variant_config(cfg, variant, data.temporal.n)
    model = init_model(net, seed)
    train_set, val_set, test_set = split_dataset(data.dataset, cfg.train.split)
    tc = replace(cfg.train, seed=seed)
    try:
        trained, history = train(model, data.spatial, data.temporal, train_set, val_set, tc)
    except TrainingDivergedError as exc:
        logger.warning("%s run %d failed: %s", variant, repeat, exc)
        return RunResult(variant, repeat, seed, {}, str(exc), exc.epoch, exc.batch)
    write_history_csv(out_dir / "histories" / f"{variant}_seed{repeat}.csv", history)
    save_checkpoint(
        _checkpoint_path(out_dir, variant, repeat),
        trained,
        data.spatial,
        data.temporal,
        meta={
            "variant": variant,
            "repeat": repeat,
            "data_seed": cfg.seed if data_seed is None else data_seed,
            "experiment": cfg.to_dict(),
        },
    )
    metrics = _test_metrics(trained, data, test_set, cfg.task)
    logger.info("%s run %d: %s", variant, repeat, metrics)
    return RunResult(variant, repeat, seed, metrics)


def _summaries(cfg: ExperimentConfig, results: list[RunResult]) -> tuple[list[str], list[list]]:
    names = ["mae", "rmse", "mape"] if cfg.task is Task.FORECASTING else ["accuracy"]
    header = ["model"]
    for name in names:
        header += [f"mean_{name}", f"std_{name}"]
    header += ["runs", "failed"]
    rows = []
    for variant in cfg.model.variants:
        ok = [r for r in results if r.variant == variant and r.failure is None]
        failed = sum(1 for r in results if r.variant == variant and r.failure is not None)
        row: list = [variant]
        for name in names:
            values = np.array([r.metrics[name] for r in ok if name in r.metrics])
            row += [float(values.mean()), float(values.std())] if values.size else [np.nan, np.nan]
        rows.append(row + [len(ok), failed])
    return header, rows


def run_source_localization(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    threads: int = 1,
    digits: int = DEFAULT_FLOAT_DIGITS,
) -> tuple[list[str], list[list]]:
    """Train every configured variant over ``repeats`` seeds with identical budgets.

    Each repeat draws its own graph and dataset; all variants of a repeat
    share them. Writes ``<task>.csv`` (mean and std of the test metric per
    variant) and ``failures.csv`` (runs whose loss went non-finite), plus a
    checkpoint and a history per run.

    Returns:
        The summary header and rows.
    """
    out_dir = Path(out_dir)
    seeds = derive_seeds(cfg.seed, cfg.model.repeats)

    def one_repeat(repeat: int) -> list[RunResult]:
        data = _generate(cfg.with_seed(seeds[repeat]))
        init_seeds = derive_seeds(seeds[repeat], len(cfg.model.variants))
        return [
            train_variant(cfg, data, variant, repeat, init_seeds[i], out_dir, seeds[repeat])
            for i, variant in enumerate(cfg.model.variants)
        ]

    results = [r for batch in run_ordered(one_repeat, range(cfg.model.repeats), threads) for r in batch]
    header, rows = _summaries(cfg, results)
    write_csv(out_dir / f"{cfg.task.value}.csv", header, rows, digits)
    failures = [(r.variant, r.repeat, r.epoch, r.batch, r.failure) for r in results if r.failure]
    write_csv(out_dir / "failures.csv", ("model", "repeat", "epoch", "batch", "message"), failures, digits)
    return header, rows


def _stability_checkpoint(cfg: ExperimentConfig, out_dir: Path, override: str | Path | None) -> Path:
    if override is not None:
        return Path(override)
    if cfg.stability.checkpoint is not None:
        return Path(cfg.stability.checkpoint)
    return _checkpoint_path(out_dir, cfg.stability.variant, 0)


def _probe_inputs(test: Dataset, count: int) -> np.ndarray:
    return test.inputs[: min(count, len(test))]


def _test_split(cfg: ExperimentConfig, spatial: Graph) -> tuple[GeneratedData, Dataset]:
    data = _generate(cfg, spatial)
    test = split_dataset(data.dataset, cfg.train.split)[2]
    if len(test) == 0:
        test = data.dataset
    return data, test


def _checkpoint_data(cfg: ExperimentConfig, ckpt: Checkpoint) -> tuple[GeneratedData, Dataset]:
    """Regenerate the test split a checkpoint was evaluated on.

    The task follows the model's readout and the window follows the
    checkpoint's temporal graph; the data seed comes from the checkpoint
    when it recorded one.
    """
    regression = ckpt.model.config.readout is Readout.REGRESSION
    task = Task.FORECASTING if regression else Task.SOURCE_LOCALIZATION
    data_cfg = replace(
        cfg.with_window(ckpt.temporal.n).with_seed(int(ckpt.meta.get("data_seed", cfg.seed))),
        task=task,
    )
    data, test = _test_split(data_cfg, ckpt.spatial)
    return replace(data, temporal=ckpt.temporal), test


def _trial_seeds(seed: int, levels: int, trials: int) -> list[list[int]]:
    return [derive_seeds(level_seed, trials) for level_seed in derive_seeds(seed, levels)]


def _feature_rnmse(reference: np.ndarray, other: np.ndarray) -> float:
    try:
        return relative_nmse(reference, other)
    except DegenerateError:
        return float("nan")


def run_stability_sweep(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    checkpoint: str | Path | None = None,
    threads: int = 1,
    digits: int = DEFAULT_FLOAT_DIGITS,
) -> list[list]:
    """Accuracy, feature distance and bound of a trained model under perturbations.

    For each SNR level, ``trials`` error matrices are sampled. Writes
    ``stability_reports.csv`` (one report per (snr, trial)) and
    ``stability_accuracy.csv`` (test metric on the perturbed graph and the
    relative NMSE of the features).

    Raises:
        CheckpointError: If the checkpoint is missing.
    """
    out_dir = Path(out_dir)
    ckpt = load_checkpoint(_stability_checkpoint(cfg, out_dir, checkpoint))
    model, spatial = ckpt.model, ckpt.spatial
    data, test = _checkpoint_data(cfg, ckpt)
    probes = _probe_inputs(test, cfg.stability.probes)
    probe = StabilityProbe.prepare(model, spatial, data.temporal, probes, cfg.stability.grid)
    nominal = evaluate(model, spatial, data.temporal, test)
    run_temporal, run_x = network_inputs(model, spatial, data.temporal, probes)
    nominal_features = embed(model, spatial, run_temporal, run_x)

    s = cfg.stability
    jobs = [
        (snr, trial, seed)
        for snr, seeds in zip(s.snr_db, _trial_seeds(cfg.seed, len(s.snr_db), s.trials))
        for trial, seed in enumerate(seeds)
    ]

    def one_trial(job):
        snr, trial, seed = job
        e = sample_error_at_snr(spatial, snr, seed)
        perturbed = relative_perturb(spatial, e)
        report = probe.report(spatial, e, cfg.stability.squared_delta)
        value = evaluate(model, perturbed, data.temporal, test)
        rnmse = _feature_rnmse(nominal_features, embed(model, perturbed, run_temporal, run_x))
        return report, [snr, trial, value, nominal, rnmse]

    outcomes = run_ordered(one_trial, jobs, threads)
    reports = [o[0] for o in outcomes]
    rows = [o[1] for o in outcomes]
    write_reports_csv(out_dir / "stability_reports.csv", reports, digits)
    metric = "accuracy" if model.config.classifies else "mae"
    write_csv(
        out_dir / "stability_accuracy.csv",
        ("snr_db", "trial", metric, f"nominal_{metric}", "rnmse"),
        rows,
        digits,
    )
    violations = sum(1 for r in reports if r.empirical_distance > r.bound)
    if violations:
        logger.warning("%d of %d trials exceed the stability bound", violations, len(reports))
    return rows


def run_epsilon_sweep(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    checkpoint: str | Path | None = None,
    threads: int = 1,
    digits: int = DEFAULT_FLOAT_DIGITS,
) -> dict:
    """Bound against distance over ``cfg.stability.epsilons``.

    Random directions (``trials`` per ε) go to ``epsilon_reports.csv``. One
    fixed direction rescaled to every ε gives the distance-versus-ε fit
    written to ``stability_fit.json``.
    """
    out_dir = Path(out_dir)
    ckpt = load_checkpoint(_stability_checkpoint(cfg, out_dir, checkpoint))
    model, spatial = ckpt.model, ckpt.spatial
    data, test = _checkpoint_data(cfg, ckpt)
    probes = _probe_inputs(test, cfg.stability.probes)
    probe = StabilityProbe.prepare(model, spatial, data.temporal, probes, cfg.stability.grid)
    squared = cfg.stability.squared_delta

    s = cfg.stability
    jobs = [
        (eps, seed)
        for eps, seeds in zip(s.epsilons, _trial_seeds(cfg.seed + 1, len(s.epsilons), s.trials))
        for seed in seeds
    ]
    reports = run_ordered(
        lambda job: probe.report(spatial, sample_error_at_epsilon(spatial, job[0], job[1]), squared),
        jobs,
        threads,
    )
    write_reports_csv(out_dir / "epsilon_reports.csv", reports, digits)

    direction = sample_error_at_epsilon(spatial, 1.0, derive_seeds(cfg.seed, 3)[2])
    fixed = [probe.report(spatial, scale_error(direction, eps), squared) for eps in cfg.stability.epsilons]
    distances = [r.empirical_distance for r in fixed]
    try:
        r2 = linear_fit_r2(cfg.stability.epsilons, distances)
    except DegenerateError:
        r2 = float("nan")
    summary = {
        "epsilons": list(cfg.stability.epsilons),
        "distances": distances,
        "bounds": [r.bound for r in fixed],
        "r2": r2,
        "violations": sum(1 for r in reports if r.empirical_distance > r.bound),
        "trials": len(reports),
    }
    write_json(out_dir / "stability_fit.json", summary)
    logger.info("distance vs epsilon: R^2 = %.4f, %d violations", r2, summary["violations"])
    return summary


def run_window_sweep(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    threads: int = 1,
    digits: int = DEFAULT_FLOAT_DIGITS,
) -> list[list]:
    """Feature distance and bound against the window length T.

    One seeded, untrained network of the stability variant per window, one
    shared spatial graph and one error matrix at ``window_snr_db``. Writes
    ``window_sweep.csv``.
    """
    out_dir = Path(out_dir)
    windows = [w for w in cfg.stability.windows if w <= cfg.diffusion.t_min]
    skipped = sorted(set(cfg.stability.windows) - set(windows))
    if skipped:
        logger.warning("windows %s exceed t_min=%d and are skipped", skipped, cfg.diffusion.t_min)
    base = _generate(cfg)
    spatial = base.spatial
    e = sample_error_at_snr(spatial, cfg.stability.window_snr_db, derive_seeds(cfg.seed, 4)[3])

    def one_window(window: int) -> list:
        wcfg = cfg.with_window(window)
        data, test = _test_split(wcfg, spatial)
        net = variant_config(wcfg, cfg.stability.variant, window)
        model = init_model(net, derive_seeds(cfg.seed + window, 1)[0])
        probes = _probe_inputs(test, cfg.stability.probes)
        probe = StabilityProbe.prepare(model, spatial, data.temporal, probes, cfg.stability.grid)
        return [window] + probe.report(spatial, e, cfg.stability.squared_delta).to_row()

    rows = run_ordered(one_window, windows, threads)
    write_csv(out_dir / "window_sweep.csv", ["window"] + PerturbationReport.field_names(), rows, digits)
    return rows


def run_spectral_dump(
    cfg: ExperimentConfig,
    checkpoint: str | Path,
    out_dir: str | Path,
    digits: int = DEFAULT_FLOAT_DIGITS,
) -> list[tuple[int, int]]:
    """Normalized magnitude responses ``|h(λ_T, λ)|`` of every learned scalar filter.

    The grid is ``cfg.spectral.grid`` points over the spatial spectrum times
    the temporal frequencies of the checkpoint's temporal graph. Filter
    ``f·F_in + g`` maps input feature g to output feature f. Filters that
    vanish on the grid are written as zeros and listed in
    ``spectral_degenerate.csv``.

    Returns:
        The ``(layer, filter)`` pairs flagged degenerate.
    """
    out_dir = Path(out_dir)
    ckpt = load_checkpoint(checkpoint)
    model, spatial = ckpt.model, ckpt.spatial
    temporal = ckpt.temporal
    if model.config.architecture is Architecture.GCNN:
        temporal = line_graph(1)
    lambda_range = spectral_range(spatial)
    lambdas = np.linspace(lambda_range[0], lambda_range[1], cfg.spectral.grid)
    lambda_Ts = temporal_frequencies(temporal)

    rows = []
    degenerate = []
    for layer, bank in enumerate(model.banks()):
        for f in range(bank.f_out):
            for g in range(bank.f_in):
                index = f * bank.f_in + g
                try:
                    h = normalize_response(bank.scalar(f, g), lambda_range, lambda_Ts, cfg.spectral.grid)
                    values = np.abs(response_grid(h, lambdas, lambda_Ts))
                except DegenerateError:
                    logger.warning("filter %d of layer %d is zero on the grid", index, layer)
                    degenerate.append((layer, index))
                    values = np.zeros((lambda_Ts.size, lambdas.size))
                for a, lambda_T in enumerate(lambda_Ts):
                    for b, lam in enumerate(lambdas):
                        rows.append((layer, index, float(lambda_T), float(lam), float(values[a, b])))
    write_csv(out_dir / "spectral_response.csv", ("layer", "filter", "lambda_T", "lambda", "response"), rows, digits)
    write_csv(out_dir / "spectral_degenerate.csv", ("layer", "filter"), degenerate, digits)
    return degenerate


def run_generation(cfg: ExperimentConfig, out_dir: str | Path) -> GeneratedData:
    """Write the graphs and the dataset of an experiment."""
    out_dir = Path(out_dir)
    data = _generate(cfg)
    save_graph(out_dir / "graph.json", data.spatial)
    save_graph(out_dir / "temporal.json", data.temporal)
    save_dataset(
        out_dir / "dataset.npz",
        data.dataset,
        communities=data.communities,
        sources=data.sources,
        start_times=data.start_times,
    )
    return data
