# main.py
"""
GD フラクタル実験ツール - メインファイル

サブコマンド: basin, quotient-basin, dimension, histogram, slice, orbits, verify,
critical-eta, saddle-basin。結果の JSON は標準出力、ログと進捗は標準エラーへ。
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from data_processing import write_json
from error_handler import UsageError, handle_error
from experiment_runner import COMMANDS, PRESETS, apply_preset, run_command
from gd_fractal_config import ExperimentConfig, config_manager, load_key_value_file

logger = logging.getLogger(__name__)

# =========================================================================
# 引数定義
# =========================================================================

# フラグ名 → (型, 説明)。フラグの値はパラメータ記録のキー（- を _ に）へ入る
PARAM_FLAGS: Dict[str, Any] = {
    "y": (float, "目標値 y"),
    "lam": (float, "正則化係数 λ"),
    "lams": (str, "λ のカンマ区切りリスト（basin の掃引）"),
    "d": (int, "ベクトルの次元 / 行列の行数"),
    "d-y": (int, "目標行列の次元"),
    "y-diag": (str, "目標行列の対角成分（カンマ区切り）"),
    "shapes": (str, "深い分解の因子の形状（例 2x2,2x2,2x2）"),
    "eta": (float, "ステップサイズ η"),
    "max-iters": (int, "最大反復回数"),
    "loss-tol": (float, "収束判定の許容誤差"),
    "loss-tol-preset": (str, "許容誤差プリセット（strict / experiment）"),
    "divergence-threshold": (float, "発散とみなす損失"),
    "x-min": (float, "窓の左端"),
    "x-max": (float, "窓の右端"),
    "y-min": (float, "窓の下端"),
    "y-max": (float, "窓の上端"),
    "nx": (int, "横のセル数"),
    "ny": (int, "縦のセル数"),
    "mode": (str, "ラベル付け（outcome / selection）"),
    "channel": (str, "着色チャネル（norm / u）"),
    "iterations": (int, "F の反復回数"),
    "input": (str, "既存の basin CSV"),
    "widths": (str, "ボックス幅（カンマ区切り）"),
    "samples-x": (int, "横のサンプル数"),
    "samples-y": (int, "縦のサンプル数"),
    "kind": (str, "スライスの種類（matrix / deep）"),
    "plane": (str, "スライス平面（random / w）"),
    "column": (int, "W 平面で動かす列"),
    "period": (int, "周期 n"),
    "suite": (str, "検証スイート名（all で全部）"),
    "scale": (float, "検証のサンプル数の倍率"),
    "u": (str, "初期値 u（カンマ区切り）"),
    "v": (str, "初期値 v（カンマ区切り）"),
    "n-steps": (int, "輪郭抽出までの GD ステップ数"),
    "which": (str, "抽出する集合（saddle / unstable / both）"),
}

SWITCH_FLAGS: Dict[str, str] = {
    "fit-dimension": "境界のボックスカウント次元も求める",
    "self-similarity": "分枝写像による自己相似性の検査も行う",
    "bisect": "シミュレーションの二分法による η* も求める",
    "refine": "解像度 2 倍でも抽出して占有率を比較する",
}

_SIM = ["eta", "max-iters", "loss-tol", "loss-tol-preset", "divergence-threshold"]
_GRID = ["x-min", "x-max", "y-min", "y-max", "nx", "ny"]

COMMAND_FLAGS: Dict[str, List[str]] = {
    "basin": ["y", "lam", "lams", "d", "mode", "channel", "fit-dimension"] + _SIM + _GRID,
    "quotient-basin": ["y", "lam", "eta", "iterations", "loss-tol"] + _GRID,
    "dimension": ["y", "lam", "eta", "iterations", "loss-tol", "input", "widths", "self-similarity"] + _GRID,
    "histogram": ["y", "lam", "x-min", "x-max", "y-min", "y-max", "samples-x", "samples-y"] + _SIM,
    "slice": ["kind", "d", "d-y", "y-diag", "shapes", "lam", "plane", "column"] + _SIM + _GRID,
    "orbits": ["period"],
    "verify": ["suite", "scale"],
    "critical-eta": ["y", "u", "v", "lam", "bisect"],
    "saddle-basin": ["y", "lam", "eta", "n-steps", "which", "refine"] + _GRID,
}

COMMAND_HELP = {
    "basin": "(u, v) 平面の収束領域のラスタ",
    "quotient-basin": "商空間 (u·v, ‖·‖²) での収束領域のラスタ",
    "dimension": "収束境界のボックスカウント次元",
    "histogram": "境界近くの窓からの収束点の分布",
    "slice": "行列・深い分解のパラメータ空間のスライス",
    "orbits": "境界写像の周期軌道",
    "verify": "検証スイートの実行",
    "critical-eta": "臨界ステップサイズ η*",
    "saddle-basin": "鞍点・不安定最小点の吸引域",
}


def _param_key(flag: str) -> str:
    return flag.replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdfractal",
        description="大きなステップサイズの勾配降下における収束領域のフラクタル構造を調べる実験ツール",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value 形式の設定ファイル")
    common.add_argument("--workers", type=int, help="ラスタ化のワーカー数（GDFRACTAL_THREADS が優先）")
    common.add_argument("--seed", type=int, help="乱数シード（64bit 非負整数）")
    common.add_argument("--preset", choices=sorted(PRESETS), help="公開済み設定の再現プリセット")
    common.add_argument("--out", help="成果物のパス接頭辞")
    common.add_argument("--json-out", help="結果 JSON の保存先（省略時は標準出力）")
    common.add_argument("--debug", action="store_true", help="DEBUG ログを出す")

    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subparsers.add_parser(command, parents=[common], help=COMMAND_HELP[command])
        for flag in COMMAND_FLAGS[command]:
            if flag in SWITCH_FLAGS:
                sub.add_argument(f"--{flag}", action="store_const", const="true", dest=_param_key(flag),
                                 help=SWITCH_FLAGS[flag])
            else:
                type_, help_ = PARAM_FLAGS[flag]
                sub.add_argument(f"--{flag}", type=type_, dest=_param_key(flag), help=help_)
    return parser

# =========================================================================
# 実行
# =========================================================================

def setup_logging(debug: bool = False):
    """標準エラーへの単一ハンドラ（標準出力は結果専用）"""
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def build_experiment_config(args: argparse.Namespace, settings) -> ExperimentConfig:
    """プリセット → 設定ファイル → フラグの順に重ねたパラメータ記録"""
    params: Dict[str, Any] = {}
    if args.preset:
        params.update(apply_preset(args.preset, args.command))
    if args.config:
        params.update(load_key_value_file(args.config, settings))
    for flag in COMMAND_FLAGS[args.command]:
        value = getattr(args, _param_key(flag), None)
        if value is not None:
            params[_param_key(flag)] = value
    if args.out:
        params["out"] = args.out

    seed = params.pop("rng_seed", settings.app.rng_seed)
    if args.seed is not None:
        seed = args.seed
    if settings.is_env_override("raster.workers"):
        workers = settings.raster.workers
    else:
        workers = params.pop("workers", settings.raster.workers)
        if args.workers is not None:
            workers = args.workers
    params.pop("workers", None)
    try:
        seed, workers = int(seed), int(workers)
    except (TypeError, ValueError):
        raise UsageError(f"rng_seed と workers は整数で指定してください: {seed!r}, {workers!r}")
    return ExperimentConfig(args.command, params, seed, workers)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    settings = config_manager.get_settings()
    setup_logging(settings.app.debug_mode or args.debug)

    try:
        cfg = build_experiment_config(args, settings)

        validation = settings.get_validation_status()
        if not validation["valid"]:
            raise UsageError("設定エラー: " + "; ".join(validation["errors"]))
        for warning in validation["warnings"]:
            logger.warning(f"⚠️ {warning}")

        logger.info(f"🚀 {cfg.command} を実行します (seed={cfg.rng_seed}, workers={cfg.workers})")
        result = run_command(cfg, settings)
        write_json(result, args.json_out)

        if cfg.command == "verify" and not result.get("passed", False):
            failed = [f"{c['suite']}.{c['name']}" for c in result["checks"] if not c["passed"]]
            logger.error(f"❌ 検証に失敗しました: {', '.join(failed)}")
            return 1
        logger.info(f"✅ {cfg.command} 完了")
        return 0
    except Exception as e:
        return handle_error(e, {"command": args.command})


if __name__ == "__main__":
    sys.exit(main())
