"""
Surrogate Lab - Command Line Application
Wires data, black box, neighbourhood strategies, surrogates, the Shapley oracle and rendering
"""
import argparse
import json
import math
import os
import sys
import time
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from blackbox_utils import accuracy, load_model, save_model, train_mlp
from config_utils import (RunConfig, add_override_flags, collect_overrides, resolve_config,
                          strategy_seed)
from data_utils import feature_names_for, generate_half_moons, load_csv, save_csv
from domain_types import STRATEGY_IDS, provenance
from error_utils import ConfigError, DimensionError, SurrogateLabError, debug_enabled, safe_log_error
from explain_manager import ExplainManager
from neighbourhood_utils import save_neighbourhood, strategy_rows, summarize_neighbourhood
from render_utils import build_panels, render_attribution_bars, render_neighbourhood_panels
from run_log_manager import RunLogManager

TABLE_COLUMNS = ['method', 'feature_index', 'attribution', 'base_value', 'fidelity']

# CSV outputs keep a fixed schema; their provenance goes to <csv path> + this suffix
SIDECAR_SUFFIX = '.meta.json'


def _unwrap(result: Dict[str, Any]) -> Dict[str, Any]:
    """Turn a manager's {'error': ...} result into an exception"""
    if 'error' in result:
        raise SurrogateLabError(result['error'])
    return result


def _write_text(path: str, text: str):
    with open(path, 'w') as f:
        f.write(text)


def _write_sidecar(csv_path: str, command: str, stamp: Dict[str, Any], **extra) -> str:
    """JSON provenance next to a CSV output; returns the sidecar path"""
    doc = {'command': command, 'document': os.path.basename(csv_path)}
    doc.update(stamp)
    doc.update(extra)
    path = csv_path + SIDECAR_SUFFIX
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + '\n')
    return path


def _run_config(args) -> RunConfig:
    return resolve_config(getattr(args, 'config', None), collect_overrides(args), getattr(args, 'seed', None))


def _load_inputs(args):
    model = load_model(args.model)
    data = load_csv(args.data)
    if model.n_features != data.d:
        raise DimensionError(f'Model expects {model.n_features} features, data has {data.d}')
    return model, data


def _parse_methods(text: str) -> List[str]:
    methods = [m.strip() for m in text.split(',') if m.strip()]
    for method in methods:
        if method not in STRATEGY_IDS:
            raise ConfigError(f"Unknown method '{method}'. Valid methods: {', '.join(STRATEGY_IDS)}")
    if not methods:
        raise ConfigError(f"No methods given. Valid methods: {', '.join(STRATEGY_IDS)}")
    return methods


def cmd_gen_data(args) -> Dict[str, Any]:
    """Generate the half-moons dataset as CSV"""
    run_config = _run_config(args)
    data = generate_half_moons(run_config.data)
    save_csv(data, args.out)
    sidecar = _write_sidecar(args.out, 'gen-data', provenance(run_config.data.seed, run_config.digest()),
                             rows=data.n)
    print(f"✅ Wrote {data.n} half-moons rows to {args.out}")
    return {'outputs': [args.out, sidecar], 'seed': run_config.data.seed, 'config_digest': run_config.digest()}


def cmd_train(args) -> Dict[str, Any]:
    """Train the MLP black box and write the model file"""
    run_config = _run_config(args)
    data = load_csv(args.data)
    cfg = run_config.train
    print(f"ℹ️  Training MLP ({data.d}-{cfg.hidden}-1) for {cfg.epochs} epochs...")
    model = train_mlp(data, cfg.hidden, cfg.epochs, cfg.learning_rate, cfg.seed)
    save_model(model, args.out, seed=cfg.seed, config_digest=run_config.digest())
    score = accuracy(model, data)
    print(f"✅ Training accuracy: {score:.4f} (loss {model.initial_loss:.4f} -> {model.final_loss:.4f})")
    return {'outputs': [args.out], 'seed': cfg.seed, 'config_digest': run_config.digest(),
            'details': {'accuracy': score}}


def _dump_problem(problem, d: int, path: str, stamp: Dict[str, Any]) -> str:
    columns = [f'z{j}' for j in range(d)] + ['weight', 'target']
    frame = pd.DataFrame(problem.to_frame_rows(), columns=columns)
    frame[columns[:d]] = frame[columns[:d]].astype(int)
    frame.to_csv(path, index=False, lineterminator='\n')
    return _write_sidecar(path, 'explain', stamp, base_value=problem.base_value, full_value=problem.full_value)


def cmd_explain(args) -> Dict[str, Any]:
    """Explain one training row with one method"""
    run_config = _run_config(args)
    if args.method not in STRATEGY_IDS:
        raise ConfigError(f"Unknown method '{args.method}'. Valid methods: {', '.join(STRATEGY_IDS)}")
    model, data = _load_inputs(args)
    manager = ExplainManager(model, data, run_config)
    z_e = manager.instance_at(args.index)
    result = _unwrap(manager.explain(z_e, args.method))['result']
    explanation = result.explanation
    stamp = provenance(explanation.seed, explanation.config_digest)
    outputs = []

    _write_text(args.out, explanation.to_json())
    outputs.append(args.out)
    print(f"✅ {args.method} explanation ({explanation.surrogate}, fidelity {explanation.fidelity:.4f}) "
          f"written to {args.out}")

    nb = result.neighbourhood
    if args.plot:
        if nb is None:
            raise ConfigError('No neighbourhood to plot for this run')
        panels = build_panels(model, data, z_e, [nb], resolution=run_config.render.resolution)
        render_neighbourhood_panels(panels, 1, 1, args.plot, panel_size=run_config.render.panel_size,
                                    stamp=stamp)
        outputs.append(args.plot)
    if args.dump_problem:
        if result.problem is None:
            raise ConfigError("--dump-problem needs the 'shapley' surrogate (--surrogate-kind shapley)")
        outputs.append(args.dump_problem)
        outputs.append(_dump_problem(result.problem, data.d, args.dump_problem, stamp))
    if args.neighbourhood_out:
        if nb is None:
            raise ConfigError('No neighbourhood was generated for this run')
        save_neighbourhood(nb, args.neighbourhood_out, args.neighbourhood_meta,
                           feature_names=feature_names_for(data, data.d),
                           config=run_config.to_dict().get(args.method),
                           config_digest=run_config.digest())
        outputs.append(args.neighbourhood_out)
        if args.neighbourhood_meta:
            outputs.append(args.neighbourhood_meta)
    elif args.neighbourhood_meta:
        raise ConfigError('--neighbourhood-meta needs --neighbourhood-out')
    return {'outputs': outputs, 'seed': run_config.seed, 'config_digest': run_config.digest()}


def attribution_table(explanations) -> pd.DataFrame:
    """One row per (method, feature) for every attribution explanation, in method order"""
    rows = []
    for explanation in explanations:
        if explanation.attribution is None:
            continue
        for j, value in enumerate(explanation.attribution):
            rows.append([explanation.method, j, value, explanation.base_value, explanation.fidelity])
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def cmd_compare(args) -> Dict[str, Any]:
    """Explain one shared instance with several methods; write panels, table and sidecars"""
    run_config = _run_config(args)
    methods = _parse_methods(args.methods)
    model, data = _load_inputs(args)
    manager = ExplainManager(model, data, run_config)
    z_e = manager.instance_at(args.index)

    print(f"ℹ️  Comparing {len(methods)} method(s) on row {args.index}...")
    results = _unwrap(manager.compare(z_e, methods))['results']
    explanations = [r.explanation for r in results]
    stamp = provenance(run_config.seed, run_config.digest())
    outputs = []

    attribution_table(explanations).to_csv(args.out_table, index=False, lineterminator='\n')
    outputs.append(args.out_table)
    outputs.append(_write_sidecar(args.out_table, 'compare', stamp, index=args.index,
                                  methods=[{'method': e.method, 'surrogate': e.surrogate, 'seed': e.seed}
                                           for e in explanations]))

    neighbourhoods = [(m, r.neighbourhood) for m, r in zip(methods, results) if r.neighbourhood is not None]
    if args.out_panel:
        if data.d != 2:
            raise DimensionError(f'--out-panel needs 2-D data, got d = {data.d}')
        panels = build_panels(model, data, z_e, [nb for _, nb in neighbourhoods],
                              titles=[m for m, _ in neighbourhoods], resolution=run_config.render.resolution)
        cols = min(3, len(panels))
        rows = math.ceil(len(panels) / cols)
        render_neighbourhood_panels(panels, rows, cols, args.out_panel, panel_size=run_config.render.panel_size,
                                    stamp=stamp)
        outputs.append(args.out_panel)

    trees = [e for e in explanations if e.tree is not None]
    if args.out_rules:
        lines = ['# ' + ' '.join(f'{key}={value}' for key, value in stamp.items()) + '\n']
        for e in trees:
            lines.append(f"# {e.method} (seed {e.seed}, fidelity {e.fidelity:.6f})\n{e.tree['rules']}\n")
        text = ''.join(lines)
        _write_text(args.out_rules, text)
        outputs.append(args.out_rules)
    elif trees:
        print(f"ℹ️  {len(trees)} tree explanation(s) not in the table; pass --out-rules to keep their rules")

    if args.out_summary:
        summary = pd.DataFrame([summarize_neighbourhood(nb, z_e) for _, nb in neighbourhoods])
        summary.to_csv(args.out_summary, index=False, lineterminator='\n')
        outputs.append(args.out_summary)
        outputs.append(_write_sidecar(args.out_summary, 'compare', stamp, index=args.index))
    if args.out_bars:
        render_attribution_bars(explanations, feature_names_for(data, data.d), args.out_bars, stamp=stamp)
        outputs.append(args.out_bars)

    for explanation in explanations:
        print(f"✅ {explanation.method:<10} {explanation.surrogate:<7} fidelity {explanation.fidelity:.4f}")
    return {'outputs': outputs, 'seed': run_config.seed, 'config_digest': run_config.digest()}


def cmd_shapley_exact(args) -> Dict[str, Any]:
    """Explain one training row with brute-force Shapley values"""
    run_config = _run_config(args)
    model, data = _load_inputs(args)
    manager = ExplainManager(model, data, run_config)
    z_e = manager.instance_at(args.index)
    explanation = _unwrap(manager.shapley_exact(z_e))['explanation']
    _write_text(args.out, explanation.to_json())
    print(f"✅ Exact Shapley values written to {args.out}")
    return {'outputs': [args.out], 'seed': strategy_seed(run_config.seed, 'kernelshap'),
            'config_digest': run_config.digest()}


def cmd_strategies(args) -> Dict[str, Any]:
    """Print (and optionally write) the strategy comparison table"""
    frame = pd.DataFrame(strategy_rows())
    print(frame.to_string(index=False))
    if args.out:
        frame.to_csv(args.out, index=False, lineterminator='\n')
        return {'outputs': [args.out]}
    return {'outputs': []}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='surrogate-lab', allow_abbrev=False,
                                     description='Local surrogate explanations under six neighbourhood strategies')
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p, with_config=True):
        p.add_argument('--run-log', default=None, metavar='PATH', help='append a record of this run to a SQLite ledger')
        if with_config:
            p.add_argument('--config', default=None, metavar='PATH',
                           help='JSON config file (default: $SURROGATE_LAB_CONFIG)')
            add_override_flags(p)

    def inputs(p):
        p.add_argument('--model', required=True, help='model file written by train')
        p.add_argument('--data', required=True, help='training CSV')
        p.add_argument('--index', required=True, type=int, help='row of the training CSV to explain')
        p.add_argument('--seed', type=int, default=None, help='root seed')

    p = sub.add_parser('gen-data', help='generate the half-moons dataset', allow_abbrev=False)
    p.add_argument('--out', required=True, help='CSV output path')
    common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser('train', help='train the MLP black box', allow_abbrev=False)
    p.add_argument('--data', required=True, help='training CSV')
    p.add_argument('--out', required=True, help='model output path')
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('explain', help='explain one instance with one method', allow_abbrev=False)
    inputs(p)
    p.add_argument('--method', required=True, help=f"one of {', '.join(STRATEGY_IDS)}")
    p.add_argument('--out', required=True, help='explanation JSON output path')
    p.add_argument('--plot', default=None, metavar='SVG', help='single-panel neighbourhood plot (2-D data)')
    p.add_argument('--dump-problem', default=None, metavar='CSV', help='write the Shapley regression problem')
    p.add_argument('--neighbourhood-out', default=None, metavar='CSV', help='write the neighbourhood')
    p.add_argument('--neighbourhood-meta', default=None, metavar='JSON', help='neighbourhood metadata sidecar')
    common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser('compare', help='compare methods on one shared instance', allow_abbrev=False)
    inputs(p)
    p.add_argument('--methods', default=','.join(STRATEGY_IDS), help='comma-separated method list')
    p.add_argument('--out-table', required=True, metavar='CSV', help='attribution table output path')
    p.add_argument('--out-panel', default=None, metavar='SVG', help='neighbourhood panels (2-D data)')
    p.add_argument('--out-rules', default=None, metavar='TXT', help='rule listings of tree explanations')
    p.add_argument('--out-summary', default=None, metavar='CSV', help='per-strategy neighbourhood statistics')
    p.add_argument('--out-bars', default=None, metavar='SVG', help='attribution bar chart')
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser('shapley-exact', help='brute-force Shapley values for one instance', allow_abbrev=False)
    inputs(p)
    p.add_argument('--out', required=True, help='explanation JSON output path')
    common(p)
    p.set_defaults(func=cmd_shapley_exact)

    p = sub.add_parser('strategies', help='print the strategy comparison table', allow_abbrev=False)
    p.add_argument('--out', default=None, metavar='CSV', help='also write the table as CSV')
    common(p, with_config=False)
    p.set_defaults(func=cmd_strategies)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    run_log = RunLogManager(args.run_log) if args.run_log else None
    started = time.perf_counter()
    try:
        summary = args.func(args)
    except (SurrogateLabError, OSError, ValueError, np.linalg.LinAlgError) as e:
        if debug_enabled():
            safe_log_error(e, context=args.command)
        print(f"❌ {e}", file=sys.stderr)
        if run_log:
            run_log.log_run(args.command, 'error', seed=getattr(args, 'seed', None),
                            duration_seconds=time.perf_counter() - started, error_message=str(e))
        return 1
    if run_log:
        run_log.log_run(args.command, 'completed', seed=summary.get('seed'),
                        config_digest=summary.get('config_digest'),
                        duration_seconds=time.perf_counter() - started,
                        outputs=summary.get('outputs'), details=summary.get('details'))
    return 0


if __name__ == '__main__':
    sys.exit(main())
