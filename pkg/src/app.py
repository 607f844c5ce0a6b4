"""バッチ実行アプリケーション"""
import logging
import math
from pathlib import Path

from config_loader import ExperimentConfig
from experiments.classical_compare import compare_quantum_classical
from experiments.fluctuation import bk_identity_summary, bk_scaling_sweep
from experiments.jaynes_cummings import (
    STATIONARY_POWER_TOL,
    JCParams,
    coherent_state,
    collapse_revival,
    jc_relaxation_run,
    fock_state,
    jc_unitary_run,
)
from physics.dynamics import uniform_grid
from report_writer import ReportWriter

logger = logging.getLogger(__name__)


class Application:
    """実験の振り分けと結果の書き出し"""

    def __init__(self, config: ExperimentConfig, out_dir="results"):
        """初期化

        Args:
            config: 解決済みの実験設定
            out_dir: 出力先ディレクトリ
        """
        self.config = config
        self.writer = ReportWriter(Path(out_dir))
        self._handlers = {
            "jc-unitary": self._run_jc_unitary,
            "jc-dissipative": self._run_jc_dissipative,
            "classical-compare": self._run_classical_compare,
            "bk-identity": self._run_bk_identity,
            "bk-sweep": self._run_bk_sweep,
        }

    @property
    def written(self) -> list[Path]:
        return self.writer.written

    def run(self) -> dict:
        """設定された実験を実行し、要約の辞書を返す"""
        c = self.config
        logger.info("実験 %s を開始します", c.experiment)
        summary = self._handlers[c.experiment]()
        summary["experiment"] = c.experiment
        self.writer.write_json(summary, f"{c.experiment}.json")
        return summary

    def summary_line(self, summary: dict) -> str:
        """標準出力に出す1行の要約"""
        keys = {
            "jc-unitary": ("W_Q_final", "max_residual"),
            "jc-dissipative": ("q_tot_final", "dH_D_final", "W_Q_final"),
            "classical-compare": ("max_deviation", "t_q"),
            "bk-identity": ("bk_average", "closed_form"),
            "bk-sweep": ("slope",),
        }[summary["experiment"]]
        parts = [f"{k}={summary[k]:.6g}" for k in keys]
        return f"{summary['experiment']}: " + ", ".join(parts)

    # ============================================================
    # 各実験
    # ============================================================

    def _params(self) -> JCParams:
        c = self.config
        return JCParams(g=c.g, n_trunc=c.n_trunc, omega=c.omega)

    def _drive_state(self, params: JCParams):
        c = self.config
        if c.alpha is not None:
            return coherent_state(c.alpha, params.n_trunc)
        return fock_state(c.fock, params.n_trunc)

    def _ledger_summary(self, ledger) -> dict:
        final = ledger.final()
        return {
            "t_final": final["t"],
            "W_Q_final": final["W_Q"],
            "q_s_final": final["Q_S"],
            "q_d_final": final["Q_D"],
            "q_tot_final": final["Q_tot"],
            "dH_D_final": final["dH_D"],
            "max_residual": ledger.max_residual,
            "max_q_tot_mismatch": ledger.max_q_tot_mismatch,
            "crosscheck_passed": ledger.crosscheck_passed(),
        }

    def _run_jc_unitary(self) -> dict:
        c = self.config
        params = self._params()
        state = self._drive_state(params)
        ledger = jc_unitary_run(params, state, c.t_max, c.step)
        self.writer.write_csv(ledger.to_frame(c.stride), "jc-unitary.csv")
        summary = self._ledger_summary(ledger)
        summary.update({
            "g": c.g,
            "n_trunc": params.n_trunc,
            "norm_deficit": state.norm_deficit,
            "mean_photon_number": state.mean_photon_number,
        })
        return summary

    def _run_jc_dissipative(self) -> dict:
        c = self.config
        params = self._params()
        ledger = jc_relaxation_run(params, c.theta, c.t_max, c.step, c.fock)
        self.writer.write_csv(ledger.to_frame(c.stride), "jc-dissipative.csv")
        summary = self._ledger_summary(ledger)
        summary.update({
            "g": c.g,
            "theta": c.theta,
            "n_trunc": params.n_trunc,
            "stationary_time": ledger.stationary_time(STATIONARY_POWER_TOL),
        })
        return summary

    def _run_classical_compare(self) -> dict:
        c = self.config
        params = self._params()
        grid = uniform_grid(c.t_max, c.step)
        result = compare_quantum_classical(params, c.alpha, grid, c.step)
        self.writer.write_csv(result.to_frame(c.stride), "classical-compare.csv")

        nbar = abs(c.alpha) ** 2
        summary = {
            "g": c.g,
            "nbar": nbar,
            "t_q": result.t_q,
            "max_deviation": result.max_deviation(),
            "max_deviation_half_tq": result.max_deviation(0.5 * result.t_q),
            "collapse_time": None,
            "revival_time": None,
        }
        if nbar > 0:
            summary["max_deviation_rabi_cycle"] = result.max_deviation(math.pi / (c.g * math.sqrt(nbar)))
            found = collapse_revival(result.times, result.w_q, params, nbar)
            if found is not None:
                summary["collapse_time"], summary["revival_time"] = found
        return summary

    def _run_bk_identity(self) -> dict:
        c = self.config
        return bk_identity_summary(c.nbar, self._params(), c.beta)

    def _run_bk_sweep(self) -> dict:
        c = self.config
        result = bk_scaling_sweep(c.nbar_list, c.g, c.beta, c.propagation, c.workers,
                                  omega=c.omega, n_trunc_floor=c.n_trunc)
        self.writer.write_csv(result.points, "bk-sweep.csv")
        summary = result.summary()
        summary["g"] = c.g
        return summary
