import logging
import time
from contextlib import contextmanager
from typing import Iterator, Sequence

# Configure logging
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s"
)
logger = logging.getLogger("preqsim")


class SimLogger:
    def __init__(self, name: str = "preqsim"):
        self.logger = logging.getLogger(name)

    def set_level(self, level: str) -> None:
        self.logger.setLevel(level.upper())

    def info(self, message: str, **kwargs):
        self.logger.info(message, **kwargs)

    def debug(self, message: str, **kwargs):
        self.logger.debug(message, **kwargs)

    def warning(self, message: str, **kwargs):
        self.logger.warning(message, **kwargs)

    def error(self, message: str, **kwargs):
        self.logger.error(message, **kwargs)

    def log_run_start(
        self, run_id: str, algorithm: str, V: float, D: Sequence[int], horizon: int
    ):
        """Log the configuration of a run that is about to start"""
        self.info(
            f"→ {run_id}: {algorithm.upper()} V={V:g} D={list(D)} T={horizon}"
        )

    def log_run_done(
        self, run_id: str, elapsed_s: float, f_av: float, q_sum_av: float, q_actual_av: float
    ):
        """Log summary statistics of a finished run with its wall time"""
        self.info(
            f"← {run_id}: f_av={f_av:.4f} Q^sum={q_sum_av:.2f} "
            f"Q^(-1)={q_actual_av:.2f} in {elapsed_s:.2f}s"
        )

    def log_check(self, name: str, passed: bool, detail: str = "", advisory: bool = False):
        """Log one property check; advisory checks never count as failures"""
        if advisory:
            status = "✓ REF" if passed else "~ REF"
        else:
            status = "✓ PASS" if passed else "✗ FAIL"
        line = f"{status} {name}"
        if detail:
            line += f" ({detail})"
        if passed:
            self.info(line)
        else:
            self.warning(line)

    @contextmanager
    def time_run(
        self, run_id: str, algorithm: str, V: float, D: Sequence[int], horizon: int
    ) -> Iterator[float]:
        """Context manager that logs the run start and yields its start time"""
        start_time = time.perf_counter()
        self.log_run_start(run_id, algorithm, V, D, horizon)
        yield start_time


# Create global logger instance
sim_logger = SimLogger()
