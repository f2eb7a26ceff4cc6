"""Startup housekeeping for the workbench log and report directories.

Oversized logs are rotated to timestamped .old files, rotated logs and
experiment report directories older than the retention window are removed.
"""
import logging
import shutil
from datetime import datetime, timedelta
from pathlib import Path
from typing import Dict, List, Optional

logger = logging.getLogger(__name__)


class LogManager:
    """Manages workbench log files and experiment report retention."""

    def __init__(self, logs_directory: str = "logs", retention_days: int = 30, max_size_mb: int = 10,
                 reports_directory: Optional[str] = None):
        """Initialize the log manager.

        Args:
            logs_directory: Directory containing log files
            retention_days: Number of days to keep rotated logs and reports
            max_size_mb: Maximum size in MB before a log is rotated
            reports_directory: Experiment output directory, if reports should be pruned too
        """
        self.logs_dir = Path(logs_directory)
        self.reports_dir = Path(reports_directory) if reports_directory else None
        self.retention_days = retention_days
        self.max_size_mb = max_size_mb
        self.max_size_bytes = max_size_mb * 1024 * 1024

        self.logs_dir.mkdir(parents=True, exist_ok=True)

        self.managed_log_files = [
            "workbench.log"
        ]

    def _cutoff_timestamp(self) -> float:
        return (datetime.now() - timedelta(days=self.retention_days)).timestamp()

    def clear_logs_on_startup(self) -> None:
        """Rotate or clear managed logs, then apply the retention policy."""
        try:
            logger.info("Starting log cleanup on startup...")

            for log_file in self.managed_log_files:
                log_path = self.logs_dir / log_file
                if not log_path.exists():
                    continue
                if log_path.stat().st_size > self.max_size_bytes:
                    self._rotate_log_file(log_path)
                else:
                    self._clear_log_file(log_path)

            self._cleanup_old_logs()
            self.cleanup_old_reports()
            logger.info("Log cleanup completed")

        except OSError as e:
            logger.error(f"Error during log cleanup: {e}")

    def _rotate_log_file(self, log_path: Path) -> None:
        """Move a log to <stem>_<timestamp>.old and start an empty one."""
        try:
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            rotated_path = log_path.parent / f"{log_path.stem}_{timestamp}.old"
            log_path.rename(rotated_path)
            log_path.touch()

            file_size_mb = rotated_path.stat().st_size / (1024 * 1024)
            logger.info(f"Rotated log {log_path.name} ({file_size_mb:.1f}MB) to {rotated_path.name}")

        except OSError as e:
            logger.error(f"Error rotating log file {log_path}: {e}")

    def _clear_log_file(self, log_path: Path) -> None:
        try:
            file_size_mb = log_path.stat().st_size / (1024 * 1024)
            with open(log_path, "w", encoding="utf-8") as f:
                f.write("")
            logger.info(f"Cleared log file {log_path.name} ({file_size_mb:.1f}MB)")

        except OSError as e:
            logger.error(f"Error clearing log file {log_path}: {e}")

    def _cleanup_old_logs(self) -> int:
        """Delete rotated .old logs past the retention window.

        Returns:
            int: Number of files deleted
        """
        cutoff = self._cutoff_timestamp()
        deleted_count = 0
        total_size_mb = 0.0

        for old_file in self.logs_dir.glob("*.old"):
            try:
                stat = old_file.stat()
                if stat.st_mtime < cutoff:
                    total_size_mb += stat.st_size / (1024 * 1024)
                    old_file.unlink()
                    deleted_count += 1
            except OSError as e:
                logger.warning(f"Error processing old log file {old_file}: {e}")

        if deleted_count > 0:
            logger.info(f"Cleaned up {deleted_count} old log files ({total_size_mb:.1f}MB total)")
        return deleted_count

    def cleanup_old_reports(self) -> List[str]:
        """Delete experiment report directories past the retention window.

        Only directories holding a report.json are considered.

        Returns:
            List[str]: Names of the removed directories
        """
        if self.reports_dir is None or not self.reports_dir.exists():
            return []
        cutoff = self._cutoff_timestamp()
        removed = []
        for run_dir in sorted(self.reports_dir.iterdir()):
            report = run_dir / "report.json"
            if not run_dir.is_dir() or not report.exists():
                continue
            try:
                if report.stat().st_mtime < cutoff:
                    shutil.rmtree(run_dir)
                    removed.append(run_dir.name)
            except OSError as e:
                logger.warning(f"Error removing report directory {run_dir}: {e}")
        if removed:
            logger.info(f"Removed {len(removed)} report directories older than {self.retention_days} days")
        return removed

    def get_log_sizes(self) -> Dict[str, float]:
        """Sizes in MB of the managed log files (0.0 when absent)."""
        sizes = {}
        for log_file in self.managed_log_files:
            log_path = self.logs_dir / log_file
            sizes[log_file] = round(log_path.stat().st_size / (1024 * 1024), 2) if log_path.exists() else 0.0
        return sizes

    def check_log_rotation_needed(self) -> List[str]:
        """Managed log files that exceed the maximum size."""
        return [
            log_file for log_file in self.managed_log_files
            if (self.logs_dir / log_file).exists()
            and (self.logs_dir / log_file).stat().st_size > self.max_size_bytes
        ]
