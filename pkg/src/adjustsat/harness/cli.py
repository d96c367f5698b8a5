"""Command-line front end: prepare, measure, serve, analyze, simulate-ds."""

from __future__ import annotations

import json
import math
from pathlib import Path

import click

from ..analysis import (
    MalformedRow,
    aggregate,
    audiogram_plot_data,
    audiogram_summary,
    export_plot_data,
    questionnaire_plot_data,
    questionnaire_tally,
    read_audiograms_csv,
    read_questionnaires_csv,
    render_svg,
    validity_filter,
)
from ..loudness import TooShort, integrated_loudness
from ..stimulus import (
    LeakageModel,
    MalformedSpec,
    MissingDefault,
    NonMonotonic,
    StemPair,
    UnmeasurableMix,
    UnmeasurableStem,
    max_achievable_ld,
    offset_tag,
    parse_grid,
    render_version_set,
    simulate_ds,
)
from ..wavio import UnreadableFile, read_wav, write_wav
from .manifest import ManifestError, load_manifest, realize_item
from .store import (
    CacheMissing,
    NoResults,
    ResultsStore,
    cache_entry_current,
    default_results_dir,
    item_signature,
    load_index,
    save_index,
    version_filename,
)


@click.group()
def main():
    """Toolkit for loudness-personalized dialogue enhancement tests."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(), help="Item manifest (JSON).")
@click.option("--target-lufs", type=float, default=None, help="Override the manifest target loudness.")
def prepare(manifest_path, target_lufs):
    """Render and cache every version of every manifest item."""
    try:
        man = load_manifest(manifest_path)
    except ManifestError as exc:
        raise click.ClickException(str(exc))
    target = man.target_lufs if target_lufs is None else target_lufs
    cache = man.output_dir
    cache.mkdir(parents=True, exist_ok=True)
    index = load_index(cache)
    index["target_lufs"] = target

    failures = []
    for entry in man.items:
        try:
            sig = item_signature(entry, target)
        except FileNotFoundError as exc:
            failures.append((entry.id, f"stem file missing: {exc.filename}"))
            continue
        if cache_entry_current(cache, index, entry.id, sig):
            n = len(index["items"][entry.id]["versions"])
            click.echo(f"{entry.id}: cached ({n} versions)")
            continue
        try:
            item = realize_item(entry, target)
            version_set = render_version_set(item)
            item_dir = cache / entry.id
            item_dir.mkdir(exist_ok=True)
            versions = {}
            for offset, version in version_set.versions.items():
                fname = version_filename(offset)
                write_wav(item_dir / fname, version.audio, bits=24)
                versions[offset_tag(offset)] = {
                    "file": fname,
                    "measured_lufs": round(version.measured_loudness, 4),
                    "nominal_ld": round(version.nominal_ld, 6),
                }
            default_audio = version_set.versions[0.0].audio
            try:
                max_ld = round(max_achievable_ld(item.stems, item.grid), 6)
            except UnmeasurableStem:
                # background vanishes below gate at the deepest attenuation
                max_ld = None
            index["items"][entry.id] = {
                "label": entry.label,
                "de_method": entry.de_method,
                "prod_type": entry.prod_type,
                "content_tags": list(entry.content_tags),
                "grid": entry.grid_spec,
                "default_ld": round(item.default_ld, 6),
                "leakage_db": entry.leakage_db,
                "sample_rate": default_audio.sample_rate,
                "duration_ms": round(default_audio.duration_s * 1000.0, 3),
                "max_ld": max_ld,
                "signature": sig,
                "versions": versions,
            }
            save_index(cache, index)
            click.echo(f"{entry.id}: rendered {len(versions)} versions")
        except (ManifestError, UnmeasurableStem, UnmeasurableMix, UnreadableFile, TooShort) as exc:
            failures.append((entry.id, str(exc)))
    save_index(cache, index)
    if failures:
        for item_id, reason in failures:
            click.echo(f"{item_id}: FAILED: {reason}", err=True)
        raise SystemExit(1)
    click.echo(f"cache up to date: {cache}")


@main.command()
@click.argument("wav_path", type=click.Path())
def measure(wav_path):
    """Print the integrated loudness of a WAV file."""
    try:
        clip = read_wav(wav_path)
    except UnreadableFile as exc:
        raise click.ClickException(str(exc))
    click.echo(f"file: {wav_path}")
    click.echo(
        f"format: {clip.n_channels} ch ({clip.channel_layout}), "
        f"{clip.sample_rate} Hz, {clip.duration_s:.3f} s"
    )
    try:
        reading = integrated_loudness(clip)
    except TooShort as exc:
        raise click.ClickException(str(exc))
    if reading.below_gate:
        click.echo("integrated loudness: below gate")
    else:
        click.echo(f"integrated loudness: {reading.lufs:.1f} LUFS")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out", "results_dir", default=None, type=click.Path(), help="Results directory.")
@click.option("--bind", default="127.0.0.1:8765", show_default=True, help="host:port to listen on.")
@click.option("--static", "static_dir", default=None, type=click.Path(), help="UI asset directory.")
@click.option("--locale", default="en", show_default=True, type=click.Choice(["en", "de"]))
def serve(manifest_path, results_dir, bind, static_dir, locale):
    """Run the session service against a prepared cache."""
    from .service import create_app

    try:
        man = load_manifest(manifest_path)
        store = ResultsStore(results_dir or default_results_dir())
        app = create_app(
            man.output_dir, list(man.playlist), store, locale=locale, static_dir=static_dir
        )
    except (ManifestError, CacheMissing) as exc:
        raise click.ClickException(str(exc))
    host, _, port = bind.rpartition(":")
    import uvicorn

    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    except OSError as exc:
        raise click.ClickException(f"cannot bind {bind}: {exc}")


def _median_or_none(values):
    if not values:
        return None
    from ..analysis import box_stats

    return box_stats(values).median


def _summary_text(results, valid, discarded_pids, agg_all, agg_method) -> str:
    ld = agg_all.groups["all"].ld
    sat = agg_all.groups["all"].satisfaction
    lines = [
        f"participants: {len({r.pid for r in results})} ({len(discarded_pids)} discarded)",
        f"valid trials: {len(valid)} of {len(results)}",
        f"chosen LD median {ld.median:.1f} LU, IQR {ld.iqr:.1f} LU, mean {ld.mean:.1f} LU",
        f"satisfaction median {sat.median:.1f}, IQR {sat.iqr:.1f}, mean {sat.mean:.1f}",
        f"mean default LD {agg_all.extras['mean_default_ld']:.1f} LU",
    ]
    oo = agg_method.groups.get("OO")
    ds = agg_method.groups.get("DS")
    if oo is not None and ds is not None:
        gap = oo.ld.median - ds.ld.median
        lines.append(f"OO-DS chosen-LD median gap {gap:.1f} LU")
    if discarded_pids:
        lines.append("discarded participants: " + ", ".join(discarded_pids))
    return "\n".join(lines) + "\n"


@main.command()
@click.argument("results_dir", required=False, type=click.Path())
@click.option("--out", "out_dir", default=None, type=click.Path(), help="Report directory.")
@click.option("--svg", is_flag=True, help="Also render each geometry document to SVG.")
def analyze(results_dir, out_dir, svg):
    """Build plot geometry and a text summary from recorded results."""
    root = Path(results_dir) if results_dir else default_results_dir()
    store = ResultsStore(root)
    try:
        results = store.read_results()
    except NoResults as exc:
        raise click.ClickException(str(exc))
    except MalformedRow as exc:
        raise click.ClickException(f"results.csv: {exc}")
    valid, _ = validity_filter(results)
    if not valid:
        raise click.ClickException("no valid trials after filtering")
    discarded_pids = sorted({r.pid for r in results} - {r.pid for r in valid})

    agg_all = aggregate(results, "all")
    agg_items = aggregate(results, "by-item")
    agg_method = aggregate(results, "by-de-method")

    refs_ld = [
        {"name": "mean", "y": round(agg_all.extras["mean_chosen_ld"], 6), "style": "solid"},
        {"name": "default-ld", "y": round(agg_all.extras["mean_default_ld"], 6), "style": "dashed"},
    ]
    for method in ("OO", "DS"):
        group = agg_method.groups.get(method)
        if group is not None:
            refs_ld.append(
                {"name": f"mean-{method.lower()}", "y": round(group.ld.mean, 6), "style": "solid"}
            )
    item_meta = store.read_item_metadata()
    for method in ("OO", "DS"):
        maxima = [
            m["max_ld"]
            for m in item_meta.values()
            if m.get("de_method") == method and m.get("max_ld") is not None
        ]
        if maxima:
            refs_ld.append(
                {
                    "name": f"{method.lower()}-max",
                    "y": round(math.fsum(maxima) / len(maxima), 6),
                    "style": "dashed",
                }
            )
    refs_sat = [
        {"name": "mean", "y": round(agg_all.extras["mean_satisfaction"], 6), "style": "solid"}
    ]

    out = Path(out_dir) if out_dir else root / "reports"
    out.mkdir(parents=True, exist_ok=True)
    docs = {
        "ld_figure": export_plot_data(agg_items, "ld-figure", references=refs_ld),
        "satisfaction_figure": export_plot_data(agg_items, "satisfaction-figure", references=refs_sat),
    }
    if store.audiograms_path.exists():
        try:
            grams = read_audiograms_csv(store.audiograms_path)
            docs["audiogram_figure"] = audiogram_plot_data(audiogram_summary(grams))
        except MalformedRow as exc:
            raise click.ClickException(f"audiograms.csv: {exc}")
    else:
        click.echo("audiograms.csv not found, skipping the audiogram figure")
    if store.questionnaires_path.exists():
        try:
            tally = questionnaire_tally(read_questionnaires_csv(store.questionnaires_path))
            docs["questionnaire_figure"] = questionnaire_plot_data(tally)
        except MalformedRow as exc:
            raise click.ClickException(f"questionnaires.csv: {exc}")
    else:
        click.echo("questionnaires.csv not found, skipping the questionnaire figure")

    for name, doc in docs.items():
        path = out / f"{name}.json"
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        click.echo(f"wrote {path}")
        if svg:
            svg_path = out / f"{name}.svg"
            svg_path.write_text(render_svg(doc) + "\n")
            click.echo(f"wrote {svg_path}")

    summary = _summary_text(results, valid, discarded_pids, agg_all, agg_method)
    (out / "summary.txt").write_text(summary)
    click.echo(f"wrote {out / 'summary.txt'}")
    click.echo(summary, nl=False)


@main.command("simulate-ds")
@click.argument("fg_path", type=click.Path())
@click.argument("bg_path", type=click.Path())
@click.option("--leakage-db", type=float, default=-20.0, show_default=True)
@click.option("--no-leakage", is_flag=True, help="Disable leakage (estimates = originals).")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--grid", "grid_spec", default=None, help="Offset grid for the ceiling report.")
def simulate_ds_cmd(fg_path, bg_path, leakage_db, no_leakage, out_dir, grid_spec):
    """Write leakage-model separation estimates and report the LD ceiling."""
    try:
        stems = StemPair(read_wav(fg_path), read_wav(bg_path))
    except (UnreadableFile, ValueError) as exc:
        raise click.ClickException(str(exc))
    try:
        model = None if no_leakage else LeakageModel(leakage_db)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    est = simulate_ds(stems, model)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_wav(out / "fg_est.wav", est.fg, bits=24)
    write_wav(out / "bg_est.wav", est.bg, bits=24)
    label = "disabled" if model is None else f"{leakage_db:g} dB"
    click.echo(f"wrote {out / 'fg_est.wav'} and {out / 'bg_est.wav'} (leakage {label})")
    if grid_spec:
        try:
            grid = parse_grid(grid_spec)
            ceiling = max_achievable_ld(est, grid)
        except (MalformedSpec, NonMonotonic, MissingDefault, UnmeasurableStem) as exc:
            raise click.ClickException(str(exc))
        click.echo(f"LD ceiling at offset {grid.offsets[-1]:+g} LU: {ceiling:.1f} LU")


if __name__ == "__main__":
    main()
