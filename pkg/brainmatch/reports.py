"""
Report export module for the brainmatch pipeline.

Turns match reports into a data frame (CSV) and JSON documents.
"""

import logging
import os
from pathlib import Path
from typing import Optional, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict

from brainmatch.matcher import MatchReport

# Configure logging
logger = logging.getLogger(__name__)

CSV_COLUMNS = ["component_index", "label", "metric", "value", "rank"]
FLOAT_FORMAT = "%.9f"


class MatchDocument(BaseModel):
    """JSON envelope for one match run."""

    model_config = ConfigDict(frozen=True)

    run_id: str
    components_path: Optional[str] = None
    template_path: Optional[str] = None
    report: MatchReport


def scores_frame(report: MatchReport) -> pd.DataFrame:
    """One row per component, ordered by rank."""
    rows = [
        {
            "component_index": s.component_index,
            "label": s.component_label,
            "metric": s.metric.value,
            "value": s.value,
            "rank": s.rank,
        }
        for s in report.scores
    ]
    frame = pd.DataFrame(rows, columns=CSV_COLUMNS)
    return frame.sort_values("rank", kind="stable").reset_index(drop=True)


def report_csv(report: MatchReport) -> str:
    """CSV text with the stable header and 9-decimal values."""
    return scores_frame(report).to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _write_text(path: Union[str, os.PathLike], text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def write_report_csv(report: MatchReport, path: Union[str, os.PathLike]) -> Path:
    """Writes the score table as CSV."""
    path = _write_text(path, report_csv(report))
    logger.info(f"Wrote {report.component_count} score row(s) to {path}")
    return path


def write_json(document: BaseModel, path: Union[str, os.PathLike]) -> Path:
    """Writes any report model as indented JSON."""
    path = _write_text(path, document.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote {type(document).__name__} to {path}")
    return path
