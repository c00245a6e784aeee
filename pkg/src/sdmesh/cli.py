"""Batch command-line front end.

Spatial lengths (``--eta``, ``--patch-radius``) accept either absolute
model units or multiples of the mesh's average centroid spacing via an
``lc`` suffix, e.g. ``3lc``. All commands are deterministic: identical
inputs, flags, and seeds produce byte-identical outputs.
"""

import csv
import json
import shutil
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import io as mesh_io
from .guidance import identity_guidance, patch_guidance
from .mesh import (
    average_centroid_spacing,
    build_neighborhoods,
    compute_face_geometry,
)
from .metrics import align_centroids, mean_normal_deviation, mean_vertex_deviation
from .multiscale import (
    RegionMask,
    combine as combine_levels,
    decompose as decompose_mesh,
    load_decomposition,
    save_decomposition,
)
from .paramselect import nu_range, region_stats
from .solver import FilterParams, SolverError, filter_signal
from .texture import filter_colors, lift_texture, write_back
from .vertex_update import update_vertices


class Length(click.ParamType):
    """Absolute length or a multiple of the average centroid spacing."""

    name = "length"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        text = str(value).strip().lower()
        try:
            if text.endswith("lc"):
                return (float(text[:-2]), True)
            return (float(text), False)
        except ValueError:
            self.fail(f"{value!r} is not a length (use e.g. 0.5 or 3lc)", param, ctx)


LENGTH = Length()


def resolve_length(spec, lc):
    value, relative = spec
    return value * lc if relative else value


def load_region_file(path):
    indices = [
        int(line) for line in Path(path).read_text().split() if line.strip()
    ]
    return np.array(indices, dtype=np.int64)


def echo_params(params, lc):
    click.echo(
        f"lambda={params.lam:g} eta={params.eta:g} ({params.eta / lc:g} lc) "
        f"mu={params.mu:g} nu={params.nu:g} max_iters={params.max_iters} "
        f"eps={params.eps:g}"
    )


@click.group()
@click.option(
    "--threads",
    type=int,
    default=0,
    help="Worker thread cap (0 = all cores). Outputs do not depend on it.",
)
def main(threads):
    """Scale-aware mesh and texture filtering."""


def _filter_once(mesh, params, guidance_kind, patch_radius_spec, lc):
    geom = compute_face_geometry(mesh, on_degenerate="skip")
    nbrs = build_neighborhoods(mesh, geom, params.eta)
    if guidance_kind == "patch":
        radius = resolve_length(patch_radius_spec, lc)
        guide = patch_guidance(mesh, geom, geom.normals, radius)
    else:
        guide = identity_guidance(geom.normals)
    result = filter_signal(geom.normals, guide, geom, nbrs, params)
    updated = update_vertices(mesh, result.signal)
    return updated, result


def _write_trace(path, result):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "fidelity", "regularizer", "total"])
        for k, breakdown in enumerate(result.trace, start=1):
            writer.writerow(
                [k, f"{breakdown.fidelity!r}", f"{breakdown.regularizer!r}",
                 f"{breakdown.total!r}"]
            )


@main.command("filter")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--lambda", "lam", type=float, default=2.0, show_default=True)
@click.option("--eta", type=LENGTH, default="3lc", show_default=True)
@click.option("--mu", type=float, default=1.5, show_default=True)
@click.option("--nu", type=float, default=0.3, show_default=True)
@click.option("--max-iters", type=int, default=100, show_default=True)
@click.option("--eps", type=float, default=0.2, show_default=True)
@click.option(
    "--guidance",
    type=click.Choice(["identity", "patch"]),
    default="identity",
    show_default=True,
)
@click.option("--patch-radius", type=LENGTH, default="2lc", show_default=True)
@click.option("--trace", type=click.Path(), default=None,
              help="Write a per-iteration energy CSV here.")
def filter_cmd(input_path, output_path, lam, eta, mu, nu, max_iters, eps,
               guidance, patch_radius, trace):
    """Filter face normals and update vertices."""
    try:
        mesh = mesh_io.load_mesh(input_path)
        geom = compute_face_geometry(mesh, on_degenerate="skip")
        lc = average_centroid_spacing(mesh, geom)
        params = FilterParams(
            lam=lam, eta=resolve_length(eta, lc), mu=mu, nu=nu,
            max_iters=max_iters, eps=eps, unit_constrained=True,
        )
        echo_params(params, lc)
        updated, result = _filter_once(mesh, params, guidance, patch_radius, lc)
        mesh_io.save_mesh(updated, output_path)
        if trace:
            _write_trace(trace, result)
        click.echo(f"converged after {result.iterations} iterations")
    except (ValueError, SolverError, OSError) as err:
        raise click.ClickException(str(err)) from err


@main.command("denoise")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--lambda", "lam", type=float, default=4.0, show_default=True)
@click.option("--eta", type=LENGTH, default="2lc", show_default=True)
@click.option("--mu", type=float, default=0.6, show_default=True)
@click.option("--nu", type=float, default=0.6, show_default=True)
@click.option("--max-iters", type=int, default=100, show_default=True)
@click.option("--eps", type=float, default=0.2, show_default=True)
@click.option("--patch-radius", type=LENGTH, default="2lc", show_default=True)
@click.option("--passes", type=int, default=2, show_default=True)
@click.option("--ground-truth", type=click.Path(exists=True), default=None)
def denoise_cmd(input_path, output_path, lam, eta, mu, nu, max_iters, eps,
                patch_radius, passes, ground_truth):
    """Denoise by repeated filtering with patch-based guidance.

    With a ground truth, prints the mean normal deviation (degrees) and the
    mean vertex deviation after centroid alignment.
    """
    try:
        mesh = mesh_io.load_mesh(input_path)
        geom = compute_face_geometry(mesh, on_degenerate="skip")
        lc = average_centroid_spacing(mesh, geom)
        params = FilterParams(
            lam=lam, eta=resolve_length(eta, lc), mu=mu, nu=nu,
            max_iters=max_iters, eps=eps, unit_constrained=True,
        )
        echo_params(params, lc)
        current = mesh
        for _ in range(passes):
            current, _ = _filter_once(current, params, "patch", patch_radius, lc)
        mesh_io.save_mesh(current, output_path)
        if ground_truth:
            truth = mesh_io.load_mesh(ground_truth)
            delta = mean_normal_deviation(
                compute_face_geometry(current, on_degenerate="skip").normals,
                compute_face_geometry(truth, on_degenerate="skip").normals,
            )
            aligned = align_centroids(current, truth)
            dmean = mean_vertex_deviation(aligned, truth)
            click.echo(f"normal deviation: {delta:.6g} degrees")
            click.echo(f"vertex deviation: {dmean:.6g}")
    except (ValueError, SolverError, OSError) as err:
        raise click.ClickException(str(err)) from err


def parse_schedule(path, lc):
    with open(path, "r", encoding="utf-8") as fh:
        entries = json.load(fh)
    schedule = []
    for entry in entries:
        eta = entry["eta"]
        if isinstance(eta, str):
            eta = resolve_length(LENGTH.convert(eta, None, None), lc)
        schedule.append(
            FilterParams(
                lam=entry["lambda"],
                eta=eta,
                mu=entry["mu"],
                nu=entry["nu"],
                max_iters=entry.get("max_iters", 100),
                eps=entry.get("eps", 0.2),
                unit_constrained=True,
            )
        )
    return schedule


@main.command("decompose")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--schedule", "schedule_path", required=True,
              type=click.Path(exists=True),
              help="JSON list of filter parameters, finest removal first.")
@click.option("--out-dir", required=True, type=click.Path())
def decompose_cmd(input_path, schedule_path, out_dir):
    """Build and persist a multiscale decomposition."""
    try:
        mesh = mesh_io.load_mesh(input_path)
        geom = compute_face_geometry(mesh, on_degenerate="skip")
        lc = average_centroid_spacing(mesh, geom)
        schedule = parse_schedule(schedule_path, lc)
        decomp = decompose_mesh(mesh, schedule)
        save_decomposition(decomp, out_dir)
        click.echo(f"decomposed into {decomp.levels} levels at {out_dir}")
    except (ValueError, SolverError, OSError, KeyError) as err:
        raise click.ClickException(str(err)) from err


@main.command("combine")
@click.option("--dir", "in_dir", required=True, type=click.Path(exists=True))
@click.option("--alpha", required=True, help="Comma-separated coefficients.")
@click.option("--region", type=click.Path(exists=True), default=None,
              help="Newline-separated face indices restricting the edit.")
@click.option("--output", "output_path", required=True, type=click.Path())
def combine_cmd(in_dir, alpha, region, output_path):
    """Recombine a stored decomposition with per-level coefficients."""
    try:
        decomp = load_decomposition(in_dir)
        alphas = [float(x) for x in alpha.split(",") if x.strip()]
        mask = None
        if region:
            mask = RegionMask.from_faces(decomp.base, load_region_file(region))
        out = combine_levels(decomp, alphas, mask=mask)
        mesh_io.save_mesh(out, output_path)
        click.echo(f"combined {len(alphas)} levels")
    except (ValueError, SolverError, OSError) as err:
        raise click.ClickException(str(err)) from err


@main.command("texture-filter")
@click.option("--mesh", "mesh_path", required=True, type=click.Path(exists=True))
@click.option("--texture", "texture_path", required=True,
              type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--lambda", "lam", type=float, default=50.0, show_default=True)
@click.option("--eta", type=LENGTH, default="0.094", show_default=True)
@click.option("--mu", type=float, default=1.0, show_default=True)
@click.option("--nu", type=float, default=0.6, show_default=True)
@click.option("--max-iters", type=int, default=50, show_default=True)
def texture_filter_cmd(mesh_path, texture_path, output_path, lam, eta, mu, nu,
                       max_iters):
    """Filter texture colors along the mesh surface."""
    try:
        mesh = mesh_io.load_mesh(mesh_path)
        geom = compute_face_geometry(mesh, on_degenerate="skip")
        lc = average_centroid_spacing(mesh, geom)
        image = mesh_io.load_image(texture_path)
        samples = lift_texture(mesh, image)
        params = FilterParams(
            lam=lam, eta=resolve_length(eta, lc), mu=mu, nu=nu,
            max_iters=max_iters,
        )
        filtered = filter_colors(samples, params)
        mesh_io.save_image(write_back(samples, filtered, image), output_path)
        click.echo(f"filtered {len(samples)} lifted pixels")
    except (ValueError, SolverError, OSError) as err:
        raise click.ClickException(str(err)) from err


@main.command("nu-select")
@click.option("--mesh", "mesh_path", required=True, type=click.Path(exists=True))
@click.option("--region-a", required=True, type=click.Path(exists=True))
@click.option("--region-b", required=True, type=click.Path(exists=True))
def nu_select_cmd(mesh_path, region_a, region_b):
    """Suggest range/guidance widths from two smooth regions."""
    try:
        mesh = mesh_io.load_mesh(mesh_path)
        geom = compute_face_geometry(mesh, on_degenerate="skip")
        stats_a = region_stats(geom, geom.normals, load_region_file(region_a))
        stats_b = region_stats(geom, geom.normals, load_region_file(region_b))
        selection = nu_range(stats_a, stats_b)
        click.echo(f"nu_min={selection.nu_min:.6g} nu_max={selection.nu_max:.6g}")
        if selection.rejected:
            click.echo("rejected: select another pair of regions")
        else:
            click.echo(f"nu={selection.nu:.6g} mu={selection.mu:.6g}")
    except (ValueError, OSError) as err:
        raise click.ClickException(str(err)) from err


if __name__ == "__main__":
    main()
