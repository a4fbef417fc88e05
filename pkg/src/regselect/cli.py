"""Command-line front end: a thin HTTP client of the regselect service.

By default the service app is driven in-process; ``--server URL`` points
the same requests at a running instance instead.  The CLI only parses
local files, ships JSON requests and formats responses.

Exit codes: 0 success (all checks pass for ``simulate``); 1 simulation
check failure; 2 input/parse error; 3 mode refusal.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_INPUT = 2
EXIT_REFUSAL = 3


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    out = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
           "  ".join("-" * w for w in widths)]
    out += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(out)


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        # starlette warns about the installed httpx major version; harmless here
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def _post(args, path: str, payload: dict) -> dict:
    with _client(args.server) as client:
        try:
            response = client.post(path, json=payload)
        except httpx.HTTPError as exc:
            print(f"error: cannot reach server: {exc}", file=sys.stderr)
            raise SystemExit(EXIT_INPUT) from None
    if response.status_code == 200:
        return response.json()
    try:
        detail = response.json().get("detail")
    except ValueError:
        detail = None
    if isinstance(detail, dict) and "message" in detail:
        code = detail.get("code")
        print(f"error: {detail['message']}", file=sys.stderr)
        raise SystemExit(EXIT_REFUSAL if code == "mode_refusal" else EXIT_INPUT)
    print(f"error: server returned {response.status_code}: {detail}", file=sys.stderr)
    raise SystemExit(EXIT_INPUT)


def _load_inputs(args, n_designs: int):
    """Read the dataset and design CSVs; resolve the variance-mode flags."""
    from .io import InputError, read_dataset_csv, read_design_csv

    try:
        dataset = read_dataset_csv(args.data)
        designs, names = [], []
        for p in args.designs[:n_designs] if n_designs else args.designs:
            m, nm = read_design_csv(p)
            designs.append(m.tolist())
            names.append(nm)
        chosen = sum([args.sigma2 is not None, args.from_error_bars, args.unknown_sigma])
        if chosen > 1:
            raise InputError("give at most one of --sigma2 / --from-error-bars / --unknown-sigma")
        variance_fields: dict = {"target_sigma": args.target_sigma}
        if args.from_error_bars:
            if dataset.error_bars is None:
                raise InputError(f"{args.data}: --from-error-bars needs a 'sigma' column")
            variance_fields["error_bars"] = dataset.error_bars.tolist()
        elif args.sigma2 is not None:
            variance_fields["sigma2"] = args.sigma2
        elif args.unknown_sigma:
            variance_fields["unknown_sigma"] = True
        elif dataset.error_bars is not None:
            variance_fields["error_bars"] = dataset.error_bars.tolist()
        else:
            variance_fields["unknown_sigma"] = True
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT) from None
    return dataset, designs, names, variance_fields


def _emit(args, body: dict, table: str) -> None:
    print(json.dumps(body, indent=2) if args.format == "json" else table)


def cmd_fit(args) -> int:
    dataset, designs, names, variance_fields = _load_inputs(args, 1)
    body = _post(args, "/fit", {"y": dataset.y.tolist(), "design": designs[0], **variance_fields})
    rows = [[name, _fmt(b)] for name, b in zip(names[0], body["beta_hat"])]
    lines = [
        f"n: {body['n']}   k: {body['k']}   variance mode: {body['variance_mode']}"
        + (f" (sigma2 = {_fmt(body['sigma2'])})" if body["sigma2"] is not None else ""),
        _table(["coefficient", "estimate"], rows),
        f"rss: {_fmt(body['rss'])}",
    ]
    if body["sigma2_hat"] is not None:
        lines.append(f"sigma2_hat: {_fmt(body['sigma2_hat'])}")
    _emit(args, body, "\n".join(lines))
    return EXIT_OK


def cmd_criteria(args) -> int:
    dataset, designs, names, variance_fields = _load_inputs(args, 0)
    payload = {"y": dataset.y.tolist(), "designs": designs, **variance_fields,
               "require_aicc": args.aicc}
    if args.gamma is not None:
        payload["gamma"] = args.gamma
    body = _post(args, "/criteria", payload)
    known = body["variance_mode"] != "unknown"
    headers = ["model", "n", "k", "rss", "aic"]
    if known:
        if args.gamma is not None:
            headers.append("aic_gamma")
    else:
        headers += ["aicc", "aicu"]
    headers.append("weight")
    rows = []
    for row, path in zip(body["rows"], args.designs):
        cells = [Path(path).name, str(row["n"]), str(row["k"]), _fmt(row["rss"]), _fmt(row["aic"])]
        if known:
            if args.gamma is not None:
                cells.append(_fmt(row["aic_gamma"]))
        else:
            cells.append("undefined" if row["aicc"] is None else _fmt(row["aicc"]))
            cells.append(_fmt(row["aicu"]))
        cells.append(_fmt(row["weight"]))
        rows.append(cells)
    mode_line = f"variance mode: {body['variance_mode']}"
    if body["sigma2"] is not None:
        mode_line += f" (sigma2 = {_fmt(body['sigma2'])})"
    mode_line += f"   weights from: {body['weights_from']}"
    _emit(args, body, mode_line + "\n" + _table(headers, rows))
    return EXIT_OK


def cmd_compare(args) -> int:
    dataset, designs, _names, variance_fields = _load_inputs(args, 2)
    if len(args.designs) != 2:
        print("error: compare needs exactly two design files", file=sys.stderr)
        return EXIT_INPUT
    payload = {
        "y": dataset.y.tolist(),
        "design1": designs[0],
        "design2": designs[1],
        "alternative": args.alternative,
        "alpha": args.alpha,
        **variance_fields,
    }
    body = _post(args, "/compare", payload)
    lines = [
        f"delta12 (criterion 2 - criterion 1): {_fmt(body['delta12'])}",
        f"trace term: {_fmt(body['trace_t2'])}",
        f"variance estimate: {_fmt(body['var_estimate'])}",
    ]
    if body["valid"]:
        lines.append(f"z: {_fmt(body['z'])}   (positive z favors model 1)")
        lines.append(f"p (two-sided): {_fmt(body['p_two_sided'])}")
        if body["p_one_sided"] is not None:
            lines.append(f"p ({body['alternative']}): {_fmt(body['p_one_sided'])}")
        verdict = "reject" if body["reject_null"] else "do not reject"
        lines.append(f"decision at alpha={_fmt(body['alpha'])}: {verdict} equal-discrepancy null")
    else:
        lines.append("flagged: non-positive variance estimate, no z / p reported")
    lines.append("caveats:")
    lines += [f"  - {c}" for c in body["caveats"]]
    _emit(args, body, "\n".join(lines))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .io import InputError, load_sim_config

    try:
        config = load_sim_config(args.config)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    payload = {
        "config": {
            "experiment": config.experiment,
            "replications": config.replications,
            "seed": config.seed,
            "params": config.params,
            "true_model": None if config.true_model is None else {
                "y0": config.true_model.y0.tolist(),
                "sigma0_2": config.true_model.sigma0_2,
            },
            "candidates": [
                {"design": m.X.tolist(), "sigma2": m.sigma2} for m in config.candidates
            ],
        },
        "workers": args.workers,
    }
    body = _post(args, "/simulate", payload)
    from .simulate import SimReport

    report = SimReport.from_dict(body)
    if args.out:
        Path(args.out).write_text(json.dumps(body, indent=2) + "\n")
    _emit(args, body, report.to_table())
    return EXIT_OK if body["all_passed"] else EXIT_CHECK_FAILURE


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def _add_variance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma2", type=float, default=None,
                   help="known common error variance")
    p.add_argument("--from-error-bars", action="store_true",
                   help="standardize per-point error bars from the dataset's sigma column")
    p.add_argument("--unknown-sigma", action="store_true",
                   help="treat the error variance as a parameter to fit")
    p.add_argument("--target-sigma", type=float, default=1.0,
                   help="common standard deviation after standardization (default 1)")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--server", default=None, help="URL of a running regselect service")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regselect",
        description="Model selection for normal linear regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="least-squares fit of one design")
    p_fit.add_argument("data", help="dataset CSV (y column, optional sigma column)")
    p_fit.add_argument("designs", nargs=1, metavar="design", help="design matrix CSV")
    _add_variance_flags(p_fit)
    _add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_cr = sub.add_parser("criteria", help="selection criteria table for one or more designs")
    p_cr.add_argument("data")
    p_cr.add_argument("designs", nargs="+", metavar="design")
    p_cr.add_argument("--gamma", type=float, default=None,
                      help="also report the gamma-penalized criterion (known variance only)")
    p_cr.add_argument("--aicc", action="store_true",
                      help="insist on the corrected criterion (refused when the variance is known)")
    _add_variance_flags(p_cr)
    _add_common(p_cr)
    p_cr.set_defaults(func=cmd_criteria)

    p_cmp = sub.add_parser("compare", help="significance test for the criterion difference")
    p_cmp.add_argument("data")
    p_cmp.add_argument("designs", nargs=2, metavar=("design1", "design2"))
    p_cmp.add_argument("--alternative", choices=("two-sided", "m1-closer", "m2-closer"),
                       default="two-sided")
    p_cmp.add_argument("--alpha", type=float, default=0.05)
    _add_variance_flags(p_cmp)
    _add_common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_sim = sub.add_parser("simulate", help="run a Monte-Carlo experiment from a JSON config")
    p_sim.add_argument("config")
    p_sim.add_argument("--out", default=None, help="also write the JSON report here")
    p_sim.add_argument("--workers", type=int, default=1)
    _add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_srv = sub.add_parser("serve", help="run the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
