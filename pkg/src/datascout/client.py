"""End-user command line client.

``fetch`` downloads and verifies an expert bundle, ``adapt`` evaluates it on
a local target manifest (the target data never leaves the machine),
``recommend`` submits the resulting report and saves the recommended URL
list, ``e2e`` chains the three.

Machine-readable results go to files; the human summary goes to stdout; logs
go to stderr. Exit codes: 0 ok, 2 usage, 3 network, 4 server error, 5 local
data error, 6 version mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import requests

from .core import load_manifest
from .errors import DatascoutError, NetworkError, VersionMismatchError
from .experts import deserialize_expert
from .fastadapt import AccuracyReport, ProbeConfig, fast_adapt
from .selection import DEFAULT_TEMPERATURE, Recommendation

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NETWORK = 3
EXIT_SERVER = 4
EXIT_DATA = 5
EXIT_VERSION = 6

BUILD_POLL_SECONDS = 0.2


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _server_error(resp: requests.Response) -> DatascoutError:
    try:
        obj = resp.json()
        return DatascoutError(f"server: {obj.get('code')}: {obj.get('message')}")
    except ValueError:
        return DatascoutError(f"server: HTTP {resp.status_code}")


def _get(server: str, path: str, **kwargs) -> requests.Response:
    try:
        resp = requests.get(server.rstrip("/") + path, timeout=60, **kwargs)
    except requests.RequestException as exc:
        raise NetworkError(f"cannot reach {server}: {exc}; is the server running?") from exc
    if resp.status_code >= 400:
        raise _server_error(resp)
    return resp


def _post(server: str, path: str, **kwargs) -> requests.Response:
    try:
        resp = requests.post(server.rstrip("/") + path, timeout=600, **kwargs)
    except requests.RequestException as exc:
        raise NetworkError(f"cannot reach {server}: {exc}; is the server running?") from exc
    if resp.status_code >= 400:
        raise _server_error(resp)
    return resp


def cmd_fetch(server: str, datasets: list[str], out_dir: Path) -> Path:
    """Download the expert bundle for the datasets and cache it locally.

    Every blob is checked against the bundle manifest's sha256 and parsed
    once so a wrong format version fails here, not at adapt time.
    """
    bundle = _get(server, "/v1/experts", params={"datasets": ",".join(datasets)}).json()
    out_dir.mkdir(parents=True, exist_ok=True)
    for entry in bundle["experts"]:
        blob = _get(server, entry["blob_url"]).content
        digest = hashlib.sha256(blob).hexdigest()
        if digest != entry["sha256"]:
            raise DatascoutError(
                f"expert {entry['global_index']}: checksum mismatch (got {digest[:12]})"
            )
        deserialize_expert(blob)  # raises VersionMismatchError / CorruptBlobError
        (out_dir / f"expert_{entry['global_index']:05d}.bin").write_bytes(blob)
    (out_dir / "bundle.json").write_text(json.dumps(bundle, sort_keys=True, indent=2))
    _log(f"fetched {len(bundle['experts'])} experts -> {out_dir}")
    return out_dir


def load_bundle(bundle_dir: Path) -> tuple[dict, list]:
    bundle = json.loads((bundle_dir / "bundle.json").read_text())
    models = []
    for entry in bundle["experts"]:
        blob = (bundle_dir / f"expert_{entry['global_index']:05d}.bin").read_bytes()
        if hashlib.sha256(blob).hexdigest() != entry["sha256"]:
            raise DatascoutError(f"cached expert {entry['global_index']} is corrupt")
        models.append(deserialize_expert(blob))
    return bundle, models


def cmd_adapt(bundle_dir: Path, target_path: Path, mode: str, out_path: Path, seed: int) -> Path:
    """Evaluate the cached bundle on the local target manifest; write the report."""
    bundle, models = load_bundle(bundle_dir)
    target = load_manifest(target_path)
    cfg = ProbeConfig(seed=seed)
    report = fast_adapt(models, target, mode=mode, cfg=cfg, dataset_ref=bundle["dataset_ref"])
    out_path.write_text(report.to_json() + "\n")
    _log(f"adapt: mode={mode} K={len(report.z)} target_size={report.target_size} -> {out_path}")
    return out_path


def cmd_recommend(
    server: str,
    report_path: Path,
    budget: int,
    out_dir: Path,
    temperature: float = DEFAULT_TEMPERATURE,
    seed: int = 0,
) -> Recommendation:
    """Submit the report, save the recommendation JSON and plain URL list."""
    report = AccuracyReport.from_json(report_path.read_text())
    resp = _post(
        server,
        "/v1/recommendations",
        json={
            "report": json.loads(report.to_json()),
            "budget": budget,
            "temperature": temperature,
            "seed": seed,
        },
    )
    rec = Recommendation.from_json(resp.text)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "recommendation.json").write_text(rec.to_json() + "\n")
    (out_dir / "urls.txt").write_text(rec.url_list())
    print(f"{'expert':>6} {'weight':>10} {'subset size':>12}")
    for row in rec.pi_summary:
        print(f"{row['expert']:>6} {row['w']:>10.6f} {row['size']:>12}")
    print(f"sampled {len(rec.sampled_ids)} items (budget {budget}) -> {out_dir / 'urls.txt'}")
    return rec


def wait_ready(server: str, dataset_id: str, timeout: float = 600.0) -> None:
    """Poll the build status endpoint until the dataset is ready."""
    deadline = time.monotonic() + timeout
    while True:
        obj = _get(server, f"/v1/datasets/{dataset_id}/status").json()
        if obj["status"] == "ready":
            return
        if obj["status"] == "failed":
            raise DatascoutError(f"build failed: {obj.get('error')}")
        if time.monotonic() > deadline:
            raise NetworkError(f"timed out waiting for {dataset_id} to become ready")
        time.sleep(BUILD_POLL_SECONDS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="datascout",
        description="fetch experts, evaluate them locally, and get a download list",
    )
    parser.add_argument(
        "--server",
        default=os.environ.get("SERVER_URL"),
        help="server base URL (env SERVER_URL)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download and verify an expert bundle")
    p.add_argument("--datasets", required=True, help="comma-separated dataset ids")
    p.add_argument("--out", required=True, type=Path, help="bundle cache directory")

    p = sub.add_parser("adapt", help="evaluate a cached bundle on a local target manifest")
    p.add_argument("--bundle", required=True, type=Path, help="bundle cache directory")
    p.add_argument("--target", required=True, type=Path, help="target manifest (JSON-lines)")
    p.add_argument("--mode", choices=("proxy", "probe"), default="proxy")
    p.add_argument("--seed", type=int, default=_env_seed())
    p.add_argument("--out", required=True, type=Path, help="report JSON path")

    p = sub.add_parser("recommend", help="submit a report and save the URL list")
    p.add_argument("--report", required=True, type=Path, help="report JSON path")
    p.add_argument("--budget", required=True, type=int)
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p.add_argument("--seed", type=int, default=_env_seed())
    p.add_argument("--out", required=True, type=Path, help="output directory")

    p = sub.add_parser("e2e", help="fetch + adapt + recommend in one run")
    p.add_argument("--datasets", required=True)
    p.add_argument("--target", required=True, type=Path)
    p.add_argument("--mode", choices=("proxy", "probe"), default="proxy")
    p.add_argument("--budget", required=True, type=int)
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p.add_argument("--seed", type=int, default=_env_seed())
    p.add_argument("--out", required=True, type=Path, help="output directory")
    return parser


def _env_seed() -> int:
    try:
        return int(os.environ.get("SEED", "0"))
    except ValueError:
        return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.server:
        parser.error("--server (or env SERVER_URL) is required")
    try:
        if args.command == "fetch":
            cmd_fetch(args.server, args.datasets.split(","), args.out)
        elif args.command == "adapt":
            cmd_adapt(args.bundle, args.target, args.mode, args.out, args.seed)
        elif args.command == "recommend":
            cmd_recommend(
                args.server, args.report, args.budget, args.out, args.temperature, args.seed
            )
        elif args.command == "e2e":
            bundle_dir = args.out / "bundle"
            cmd_fetch(args.server, args.datasets.split(","), bundle_dir)
            report_path = args.out / "report.json"
            cmd_adapt(bundle_dir, args.target, args.mode, report_path, args.seed)
            cmd_recommend(
                args.server, report_path, args.budget, args.out, args.temperature, args.seed
            )
        return EXIT_OK
    except NetworkError as exc:
        _log(f"network error: {exc}")
        return EXIT_NETWORK
    except VersionMismatchError as exc:
        _log(f"version mismatch: {exc}")
        return EXIT_VERSION
    except DatascoutError as exc:
        if str(exc).startswith("server:"):
            _log(f"{exc}")
            return EXIT_SERVER
        _log(f"error: {exc}")
        return EXIT_DATA
    except OSError as exc:
        _log(f"io error: {exc}")
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
