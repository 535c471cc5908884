# error_handler.py
"""
勾配降下ダイナミクス実験ツール - エラー処理
例外階層・エラー履歴・終了コードの対応付けを提供
"""

import logging
import traceback
from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np

logger = logging.getLogger(__name__)

# =========================================================================
# 例外階層
# =========================================================================

class GDFractalError(Exception):
    """本ツールが送出する例外の基底クラス"""


class UsageError(GDFractalError, ValueError):
    """フラグ・設定ファイルの不正"""


class DomainError(GDFractalError, ValueError):
    """演算の前提条件（定義域）違反"""


class BranchDomainError(DomainError):
    """逆写像の分枝が定義されない点で呼ばれた"""

    def __init__(self, message: str, branch: Optional[str] = None, step: Optional[int] = None):
        if step is not None:
            message = f"{message} (step={step})"
        super().__init__(message)
        self.branch = branch
        self.step = step


class RootFindingError(GDFractalError):
    """五次方程式の求根に失敗"""

    def __init__(self, message: str, residuals: Optional[List[float]] = None):
        if residuals:
            report = ", ".join(f"{r:.3e}" for r in residuals)
            message = f"{message} [残差: {report}]"
        super().__init__(message)
        self.residuals = list(residuals or [])


class ConvergenceError(GDFractalError):
    """反復上限・探索範囲を使い切った"""


# =========================================================================
# エラー履歴
# =========================================================================

_ERROR_HISTORY: List[Dict[str, Any]] = []
_HISTORY_LIMIT = 10

EXIT_CODES = {
    UsageError: 2,
    DomainError: 3,
    RootFindingError: 4,
    ConvergenceError: 4,
    OSError: 5,
}


def _summarize(value: Any) -> Any:
    """配列はshapeだけ残して履歴を軽く保つ"""
    if isinstance(value, np.ndarray):
        return f"ndarray(shape={value.shape}, dtype={value.dtype})"
    if isinstance(value, (list, tuple)) and len(value) > 8:
        return f"{type(value).__name__}(len={len(value)})"
    return value


def record_error(e: Exception, context: Optional[Dict[str, Any]] = None):
    """エラーを履歴に記録する（直近10件）"""
    simplified_context = {k: _summarize(v) for k, v in (context or {}).items()}
    _ERROR_HISTORY.append({
        "timestamp": datetime.now().strftime('%Y-%m-%d %H:%M:%S'),
        "error_type": type(e).__name__,
        "error_message": str(e),
        "context": simplified_context,
    })
    if len(_ERROR_HISTORY) > _HISTORY_LIMIT:
        del _ERROR_HISTORY[:-_HISTORY_LIMIT]


def get_error_history() -> List[Dict[str, Any]]:
    return list(_ERROR_HISTORY)


def clear_error_history():
    _ERROR_HISTORY.clear()


def exit_code_for(e: BaseException) -> int:
    for exc_type, code in EXIT_CODES.items():
        if isinstance(e, exc_type):
            return code
    return 1


def handle_error(e: Exception, context: Optional[Dict[str, Any]] = None) -> int:
    """エラーをログ出力・記録し、プロセス終了コードを返す"""
    code = exit_code_for(e)
    if isinstance(e, UsageError):
        logger.error(f"❌ 使い方の誤り: {e}")
    elif isinstance(e, DomainError):
        logger.error(f"❌ 定義域エラー ({type(e).__name__}): {e}")
    elif isinstance(e, GDFractalError):
        logger.error(f"❌ 数値計算エラー ({type(e).__name__}): {e}")
    elif isinstance(e, OSError):
        logger.error(f"❌ 入出力エラー: {e}")
    else:
        logger.error(f"❌ 予期しないエラーが発生しました: {type(e).__name__}: {e}")
        logger.debug(traceback.format_exc())

    record_error(e, context or {})
    return code
