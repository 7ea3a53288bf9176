"""Command-line front end: score, sweep, spectrum, plan, compare.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
failure. All diagnostics go to stderr; declared outputs are the only
side effects.
"""

from __future__ import annotations

import functools
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from .exceptions import NumericalError, ValidationError
from .kernels import build_kernel_set
from .manifest import DomainEmbeddingSet, Manifest, build_domain_embeddings, load_manifest
from .mixer import (
    DEFAULT_LAMBDA,
    MixtureConfig,
    baseline_avg,
    baseline_single_modality,
    baseline_uniform,
    madmix,
    orthogonal_score,
    softmax,
    spectral_score,
)
from .sampling import DrawStream, build_plan, draws_to_csv, expected_counts

METHODS = ("uniform", "madmix", "single:<modality>", "avg", "fused", "orthogonal")

EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            _fail(EXIT_VALIDATION, str(exc))
        except NumericalError as exc:
            _fail(EXIT_NUMERICAL, str(exc))
        except OSError as exc:
            _fail(EXIT_IO, str(exc))

    return wrapper


def _write_output(text: str, output: str | None) -> None:
    if output is None:
        click.echo(text, nl=False)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _load_embeddings(
    manifest_path: str, aggregation: str
) -> tuple[Manifest, DomainEmbeddingSet]:
    manifest = load_manifest(manifest_path)
    return manifest, build_domain_embeddings(manifest, strategy=aggregation)


def _config(lam: float, aggregation: str, normalization: str) -> MixtureConfig:
    if not lam > 0.0:
        raise ValidationError("lambda must be positive")
    return MixtureConfig(lam=lam, aggregation=aggregation, normalization=normalization)


def _method_weights(
    method: str, emb: DomainEmbeddingSet, cfg: MixtureConfig
) -> np.ndarray:
    if method == "uniform":
        return baseline_uniform(emb.k)
    if method == "madmix":
        return madmix(emb, cfg).weights
    if method.startswith("single:"):
        return baseline_single_modality(emb, method.split(":", 1)[1], cfg.lam)
    if method == "fused":
        # fused embeddings arrive as a pseudo-modality named "fused"
        return baseline_single_modality(emb, "fused", cfg.lam)
    if method == "avg":
        real = [m for m in emb.modality_names if m != "fused"]
        stack = np.vstack(
            [baseline_single_modality(emb, m, cfg.lam) for m in real]
        )
        return baseline_avg(stack)
    if method == "orthogonal":
        kset = build_kernel_set(emb, cfg.normalization)
        scores = orthogonal_score(kset, emb.presence, cfg.lam)
        return softmax(scores.sum(axis=0))
    raise ValidationError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _weights_human(names, weights) -> str:
    # 6-decimal weights alongside table-style percentages
    lines = [
        f"{name}  {w:.6f}  ({100.0 * w:.2f}%)" for name, w in zip(names, weights)
    ]
    return "\n".join(lines) + "\n"


def _export_kernels(export_dir, emb, kset) -> None:
    out = Path(export_dir)
    out.mkdir(parents=True, exist_ok=True)
    named = list(zip(emb.modality_names, kset.per_modality)) + [
        ("multimodal", kset.multimodal)
    ]
    for name, kern in named:
        rows = [",".join(repr(float(x)) for x in row) for row in kern.values]
        (out / f"kernel_{name}.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        (out / f"kernel_{name}.json").write_text(
            _json_dumps({"k": kern.k, "values": kern.values.flatten().tolist()}),
            encoding="utf-8",
        )


@click.group()
def cli() -> None:
    """Multi-modal domain-mixture weights and sampling plans."""


@cli.command("score")
@click.option("--manifest", "manifest_path", required=True, help="Manifest JSON path.")
@click.option("--lambda", "lam", type=float, default=DEFAULT_LAMBDA, show_default=True)
@click.option("--aggregation", type=click.Choice(["equal", "size_weighted"]), default="equal")
@click.option("--normalization", type=click.Choice(["none", "unit_trace"]), default="none")
@click.option("--output", default=None, help="Output file (default: stdout).")
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "human"]), default="json")
@click.option("--timing", is_flag=True, help="Print score-computation wall time to stderr.")
@_handle_errors
def cmd_score(manifest_path, lam, aggregation, normalization, output, fmt, timing):
    """Compute domain weights for a manifest."""
    cfg = _config(lam, aggregation, normalization)
    _, emb = _load_embeddings(manifest_path, aggregation)
    start = time.perf_counter()
    result = madmix(emb, cfg)
    elapsed = time.perf_counter() - start
    if timing:
        click.echo(f"timing: score computation took {elapsed:.6f} s", err=True)
    if fmt == "json":
        text = _json_dumps(result.to_json_dict())
    elif fmt == "csv":
        lines = ["domain,weight"]
        lines += [f"{n},{float(w)!r}" for n, w in zip(result.domain_names, result.weights)]
        text = "\n".join(lines) + "\n"
    else:
        text = _weights_human(result.domain_names, result.weights)
    _write_output(text, output)


@cli.command("sweep")
@click.option("--manifest", "manifest_path", required=True)
@click.option("--lambdas", default="", help="Comma-separated positive lambda values.")
@click.option("--aggregation", type=click.Choice(["equal", "size_weighted"]), default="equal")
@click.option("--normalization", type=click.Choice(["none", "unit_trace"]), default="none")
@click.option("--output", default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "human"]), default="csv")
@_handle_errors
def cmd_sweep(manifest_path, lambdas, aggregation, normalization, output, fmt):
    """Weights for each lambda in a list; one row per lambda."""
    values = [float(tok) for tok in lambdas.split(",") if tok.strip()]
    if not values:
        raise ValidationError("lambda list must be nonempty")
    if any(v <= 0.0 for v in values):
        raise ValidationError("lambda must be positive")
    _, emb = _load_embeddings(manifest_path, aggregation)
    rows = []
    for lam in values:
        cfg = _config(lam, aggregation, normalization)
        rows.append((lam, madmix(emb, cfg)))
    names = rows[0][1].domain_names
    if fmt == "json":
        text = _json_dumps(
            [
                {"lambda": lam, "weights": {n: float(w) for n, w in zip(names, res.weights)}}
                for lam, res in rows
            ]
        )
    elif fmt == "csv":
        lines = ["lambda," + ",".join(names)]
        for lam, res in rows:
            lines.append(f"{lam!r}," + ",".join(repr(float(w)) for w in res.weights))
        text = "\n".join(lines) + "\n"
    else:
        blocks = [
            f"lambda={lam:g}\n" + _weights_human(names, res.weights) for lam, res in rows
        ]
        text = "\n".join(blocks)
    _write_output(text, output)


@cli.command("spectrum")
@click.option("--manifest", "manifest_path", required=True)
@click.option("--lambda", "lam", type=float, default=DEFAULT_LAMBDA, show_default=True)
@click.option("--aggregation", type=click.Choice(["equal", "size_weighted"]), default="equal")
@click.option("--normalization", type=click.Choice(["none", "unit_trace"]), default="none")
@click.option("--output", default=None)
@click.option(
    "--export-kernels",
    "export_dir",
    default=None,
    help="Directory for raw kernel CSV/JSON exports.",
)
@_handle_errors
def cmd_spectrum(manifest_path, lam, aggregation, normalization, output, export_dir):
    """Eigenvalues, filter factors, projections, and spectral scores (CSV)."""
    cfg = _config(lam, aggregation, normalization)
    _, emb = _load_embeddings(manifest_path, aggregation)
    kset = build_kernel_set(emb, cfg.normalization)
    delta = emb.modality_counts.astype(np.float64)
    eigvals, eigvecs = np.linalg.eigh(kset.multimodal.values)
    filt = eigvals / (eigvals + lam)
    proj = eigvecs.T @ delta
    scores = spectral_score(kset.multimodal, delta, lam)

    lines = ["index,eigenvalue,filter,projection"]
    order = np.argsort(eigvals)[::-1]
    for rank, j in enumerate(order):
        lines.append(f"{rank},{float(eigvals[j])!r},{float(filt[j])!r},{float(proj[j])!r}")
    lines.append("")
    lines.append("domain,spectral_score")
    lines += [f"{n},{float(s)!r}" for n, s in zip(emb.domain_names, scores)]
    _write_output("\n".join(lines) + "\n", output)

    if export_dir is not None:
        _export_kernels(export_dir, emb, kset)


@cli.command("plan")
@click.option("--manifest", "manifest_path", required=True)
@click.option("--method", default="madmix", show_default=True)
@click.option("--lambda", "lam", type=float, default=DEFAULT_LAMBDA, show_default=True)
@click.option("--aggregation", type=click.Choice(["equal", "size_weighted"]), default="equal")
@click.option("--normalization", type=click.Choice(["none", "unit_trace"]), default="none")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--draw", "n_draws", type=int, default=None, help="Emit a draw CSV of this length.")
@click.option("--draw-output", default=None, help="Path for the draw CSV (default: stdout).")
@click.option("--steps", type=int, default=None, help="Include expected counts for n steps.")
@click.option("--output", default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "human"]), default="json")
@_handle_errors
def cmd_plan(manifest_path, method, lam, aggregation, normalization, seed, n_draws,
             draw_output, steps, output, fmt):
    """Build a hierarchical sampling plan (JSON lines by default)."""
    cfg = _config(lam, aggregation, normalization)
    manifest, emb = _load_embeddings(manifest_path, aggregation)
    weights = _method_weights(method, emb, cfg)
    plan = build_plan(weights, manifest, seed=seed)

    if fmt == "json":
        text = plan.to_jsonl()
        if steps is not None:
            counts = expected_counts(plan, steps)
            header = json.loads(text.splitlines()[0])
            header["n"] = steps
            lines = [json.dumps(header)]
            for entry, expected in counts:
                lines.append(
                    json.dumps(
                        {
                            "domain": entry.domain,
                            "dataset": entry.dataset,
                            "p": entry.probability,
                            "expected": expected,
                        }
                    )
                )
            text = "\n".join(lines) + "\n"
    elif fmt == "csv":
        header = "domain,dataset,p" + (",expected" if steps is not None else "")
        lines = [header]
        for entry, expected in expected_counts(plan, steps or 0):
            row = f"{entry.domain},{entry.dataset},{entry.probability!r}"
            if steps is not None:
                row += f",{float(expected)!r}"
            lines.append(row)
        text = "\n".join(lines) + "\n"
    else:
        lines = []
        for entry, expected in expected_counts(plan, steps or 0):
            row = f"{entry.domain}/{entry.dataset}  {100.0 * entry.probability:.2f}%"
            if steps is not None:
                row += f"  expected {expected:.2f}"
            lines.append(row)
        text = "\n".join(lines) + "\n"
    _write_output(text, output)

    if n_draws is not None:
        if n_draws < 0:
            raise ValidationError("draw count must be nonnegative")
        csv_text = draws_to_csv(DrawStream(plan).draw(n_draws))
        _write_output(csv_text, draw_output)


@cli.command("compare")
@click.option("--manifest", "manifest_path", required=True)
@click.option(
    "--methods",
    default="uniform,madmix",
    show_default=True,
    help="Comma-separated method names (uniform, madmix, single:<mod>, avg, fused, orthogonal).",
)
@click.option("--lambda", "lam", type=float, default=DEFAULT_LAMBDA, show_default=True)
@click.option("--aggregation", type=click.Choice(["equal", "size_weighted"]), default="equal")
@click.option("--normalization", type=click.Choice(["none", "unit_trace"]), default="none")
@click.option("--output", default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "human"]), default="csv")
@click.option(
    "--export-kernels",
    "export_dir",
    default=None,
    help="Directory for raw kernel CSV/JSON exports.",
)
@_handle_errors
def cmd_compare(manifest_path, methods, lam, aggregation, normalization, output, fmt,
                export_dir):
    """Weight table: one column per method, one row per domain."""
    names = [tok.strip() for tok in methods.split(",") if tok.strip()]
    if not names:
        raise ValidationError("methods list must be nonempty")
    cfg = _config(lam, aggregation, normalization)
    _, emb = _load_embeddings(manifest_path, aggregation)
    columns = {m: _method_weights(m, emb, cfg) for m in names}

    if export_dir is not None:
        _export_kernels(export_dir, emb, build_kernel_set(emb, cfg.normalization))

    if fmt == "json":
        text = _json_dumps(
            {
                m: {n: float(w) for n, w in zip(emb.domain_names, col)}
                for m, col in columns.items()
            }
        )
    elif fmt == "csv":
        lines = ["domain," + ",".join(names)]
        for i, dom in enumerate(emb.domain_names):
            lines.append(dom + "," + ",".join(repr(float(columns[m][i])) for m in names))
        text = "\n".join(lines) + "\n"
    else:
        width = max(len(d) for d in emb.domain_names)
        lines = [" " * width + "  " + "  ".join(f"{m:>10}" for m in names)]
        for i, dom in enumerate(emb.domain_names):
            cells = "  ".join(f"{100.0 * float(columns[m][i]):>9.2f}%" for m in names)
            lines.append(f"{dom:<{width}}  {cells}")
        text = "\n".join(lines) + "\n"
    _write_output(text, output)


def main() -> None:
    limit = os.environ.get("MADMIX_THREADS")
    if limit:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=int(limit)):
            cli.main(prog_name="madmix")
    else:
        cli.main(prog_name="madmix")


if __name__ == "__main__":
    main()
