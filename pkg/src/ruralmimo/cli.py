"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 runtime error, 4 infeasible target.

Every output carries a run manifest. CSV files start with one
``# manifest: {...}`` comment line; JSON files wrap the payload as
``{"manifest": ..., "result": ...}``. ``payload_sha256`` in the manifest
hashes the CSV body (or the canonical JSON of ``result``) so that
``ruralmimo verify`` can check a file after the fact.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

from . import __version__, econ, geodata, montecarlo
from .scenario import ConfigError, load_document, validate

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_INFEASIBLE = 0, 2, 3, 4
MANIFEST_PREFIX = "# manifest: "


class CliConfigError(Exception):
    pass


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _manifest(command, input_digest, seed, warnings, payload_sha):
    return {
        "command": command,
        "scenario_digest": input_digest,
        "master_seed": seed,
        "tool_version": __version__,
        "warnings": sorted(set(warnings)),
        "payload_sha256": payload_sha,
    }


def write_csv(path, body: str, command, input_digest, seed, warnings=()) -> None:
    man = _manifest(command, input_digest, seed, warnings, _sha(body.encode()))
    text = MANIFEST_PREFIX + json.dumps(man, sort_keys=True, separators=(",", ":")) + "\n" + body
    Path(path).write_text(text)


def write_json(path, result, command, input_digest, seed, warnings=()) -> None:
    man = _manifest(command, input_digest, seed, warnings, _sha(_canonical(result)))
    Path(path).write_text(json.dumps({"manifest": man, "result": result}, indent=2, sort_keys=True) + "\n")


def verify_file(path) -> tuple[bool, str]:
    text = Path(path).read_text()
    if text.startswith(MANIFEST_PREFIX):
        head, _, body = text.partition("\n")
        man = json.loads(head[len(MANIFEST_PREFIX):])
        got = _sha(body.encode())
    else:
        doc = json.loads(text)
        man = doc["manifest"]
        got = _sha(_canonical(doc["result"]))
    ok = got == man.get("payload_sha256")
    return ok, f"{'OK' if ok else 'MISMATCH'} {path} ({man.get('command')}, payload {got[:12]})"


def _scenario(path, seed=None):
    path = Path(path)
    if not path.is_file():
        raise CliConfigError(f"MissingKey[config]: file not found: {path}")
    doc = load_document(path)
    if seed is not None:
        doc["seed"] = seed
    return validate(doc)


def _positive_drops(n):
    if n < 1:
        raise CliConfigError(f"RangeViolation[drops]: {n} must be >= 1")
    return n


def file_digest(*paths, extra=()) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    for e in extra:
        h.update(repr(e).encode())
    return h.hexdigest()


def cmd_ul_rate(args) -> int:
    scen = _scenario(args.config, args.seed)
    drops = _positive_drops(args.drops)
    if args.distance_km <= 0:
        raise CliConfigError("RangeViolation[distance-km]: must be positive")
    eirps = args.eirp or [scen.eirp_max_dbm]
    ens = montecarlo.DropEnsemble(drops, args.distance_km * 1e3, master_seed=scen.seed)
    sums = montecarlo.ul_rate_experiment_multi(scen, ens, eirps)
    rows = []
    for e, s in zip(eirps, sums):
        rows.append(montecarlo.SweepRow(
            scen.bs_type.value, scen.num_users, scen.carrier_frequency_hz / 1e6, scen.bandwidth_hz / 1e6,
            scen.duplex.value, float(e), args.distance_km, s, None, list(s.warnings)))
    warnings = [w for s in sums for w in s.warnings]
    write_csv(args.out, montecarlo.rows_to_csv(rows), "ul-rate", scen.digest(), scen.seed, warnings)
    return EXIT_OK


def cmd_coverage(args) -> int:
    scen = _scenario(args.config, args.seed)
    drops = _positive_drops(args.drops)
    if not 0 < args.percentile < 100:
        raise CliConfigError("RangeViolation[percentile]: must lie in (0, 100)")
    ens = montecarlo.DropEnsemble(drops, montecarlo.MAX_SEARCH_RADIUS_M, master_seed=scen.seed)
    try:
        res = montecarlo.coverage_search(scen, ens, args.target_mbps * 1e6, args.percentile, args.link)
    except montecarlo.TargetUnreachable as exc:
        print(f"TargetUnreachable: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    write_json(args.out, res.to_dict(), "coverage", scen.digest(), scen.seed, res.warnings)
    return EXIT_OK


def cmd_sweep(args) -> int:
    path = Path(args.grid)
    if not path.is_file():
        raise CliConfigError(f"MissingKey[grid]: file not found: {path}")
    grid = montecarlo.SweepGrid.from_document(load_document(path))
    if args.drops is not None:
        grid.num_drops = _positive_drops(args.drops)
    if not grid.bands:
        raise CliConfigError("MissingKey[grid.band]: at least one band is required")
    rows = montecarlo.sweep(grid)
    warnings = [w for r in rows for w in r.warnings]
    write_csv(args.out, montecarlo.rows_to_csv(rows), "sweep",
              file_digest(path, extra=[grid.num_drops]), grid.master_seed, warnings)
    return EXIT_OK


def read_ul_table(path, k=None, fc_mhz=None, bs_type=None) -> dict[float, float]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    table = {}
    for row in csv.DictReader(io.StringIO("\n".join(lines))):
        if k is not None and "K" in row and int(row["K"]) != k:
            continue
        if bs_type is not None and "bs_type" in row and row["bs_type"] != bs_type:
            continue
        if fc_mhz is not None and "fc_mhz" in row and float(row["fc_mhz"]) != fc_mhz:
            continue
        col = "rate_mbps" if "rate_mbps" in row else "rate_p5_mbps"
        if row.get(col, "") == "":
            continue
        table[float(row["eirp_dbm"])] = float(row[col]) * 1e6
    return table


def cmd_econ(args) -> int:
    if args.traffic:
        if not Path(args.traffic).is_file():
            raise CliConfigError(f"MissingKey[traffic]: file not found: {args.traffic}")
        traffic = econ.TrafficModel(**load_document(args.traffic))
    else:
        traffic = econ.TrafficModel()
    if not Path(args.ul_table).is_file():
        raise CliConfigError(f"MissingKey[ul-table]: file not found: {args.ul_table}")
    table = read_ul_table(args.ul_table, args.k, args.fc_mhz, args.bs_type)
    if not table:
        raise CliConfigError("RangeViolation[ul-table]: no usable rows")
    try:
        rep = econ.econ_report(args.dcov_km, args.k, args.target_mbps * 1e6, traffic, table)
    except econ.NoFeasibleEirp as exc:
        print(f"NoFeasibleEirp: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    result = json.loads(rep.to_json())
    result["table_row"] = rep.table_row()
    inputs = [args.ul_table] + ([args.traffic] if args.traffic else [])
    digest = file_digest(*inputs, extra=[args.dcov_km, args.k, args.target_mbps])
    write_json(args.out, result, "econ", digest, None)
    return EXIT_OK


def cmd_sites(args) -> int:
    if not Path(args.raster).is_file():
        raise CliConfigError(f"MissingKey[raster]: file not found: {args.raster}")
    raster = geodata.load_raster(args.raster)
    sites = geodata.find_sites(raster, args.rho, args.radius_km, args.top)
    buf = io.StringIO()
    geodata.sites_to_csv(sites, buf)
    warnings = [f"missing_cells={raster.missing}"] if raster.missing else []
    warnings += ["partial_coverage"] if any(s.partial for s in sites) else []
    digest = file_digest(args.raster, extra=[args.rho, args.radius_km, args.top])
    write_csv(args.out, buf.getvalue(), "sites", digest, None, warnings)
    return EXIT_OK


def cmd_verify(args) -> int:
    status = EXIT_OK
    for p in args.paths:
        ok, msg = verify_file(p)
        print(msg)
        if not ok:
            status = EXIT_RUNTIME
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ruralmimo", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ul-rate", help="uplink rate percentiles at one disk radius")
    p.add_argument("--config", required=True)
    p.add_argument("--distance-km", type=float, required=True)
    p.add_argument("--drops", type=int, default=200)
    p.add_argument("--eirp", type=float, action="append", help="EIRP cap in dBm (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ul_rate)

    p = sub.add_parser("coverage", help="coverage distance for a percentile rate target")
    p.add_argument("--config", required=True)
    p.add_argument("--target-mbps", type=float, required=True)
    p.add_argument("--percentile", type=float, default=5.0)
    p.add_argument("--link", choices=["dl", "ul"], default="dl")
    p.add_argument("--drops", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("sweep", help="grid of uplink experiments")
    p.add_argument("--grid", required=True)
    p.add_argument("--drops", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("econ", help="covered users, density and minimum EIRP")
    p.add_argument("--dcov-km", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--traffic")
    p.add_argument("--ul-table", required=True)
    p.add_argument("--fc-mhz", type=float)
    p.add_argument("--bs-type", default="HTBS", help="row filter when the table holds several tower types")
    p.add_argument("--target-mbps", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_econ)

    p = sub.add_parser("sites", help="rank tower sites on a population raster")
    p.add_argument("--raster", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--radius-km", type=float, required=True)
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sites)

    p = sub.add_parser("verify", help="re-hash output files against their manifests")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(v, file=sys.stderr)
        return EXIT_CONFIG
    except (CliConfigError, geodata.ParseError, geodata.InconsistentDimensions) as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
