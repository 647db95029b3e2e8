# src/utils/file_utils.py
import json
from pathlib import Path
from typing import Any, Optional, Union

import pandas as pd
import yaml

from src.config.settings import settings
from src.utils.exceptions import DataParseError
from src.utils.logging_config import logger

PathLike = Union[str, Path]


def _output_path(name: PathLike, suffix: str, output_dir: Optional[PathLike]) -> Path:
    path = Path(name)
    if not path.is_absolute() and path.parent == Path("."):
        path = Path(output_dir or settings.OUTPUT_DIR) / path
    if path.suffix != suffix:
        path = path.with_suffix(suffix)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def save_json(data: Any, filename: PathLike, output_dir: Optional[PathLike] = None) -> Path:
    """Writes a JSON document (floats keep full repr precision). Bare names go under OUTPUT_DIR."""
    output_path = _output_path(filename, ".json", output_dir)
    with open(output_path, 'w', encoding='utf-8') as f:
        json.dump(data, f, ensure_ascii=False, indent=2)
    logger.info(f"JSON file saved to: {output_path}")
    return output_path


def save_markdown(content: str, filename: PathLike, output_dir: Optional[PathLike] = None) -> Path:
    """Writes text content as a Markdown file."""
    output_path = _output_path(filename, ".md", output_dir)
    with open(output_path, 'w', encoding='utf-8') as f:
        f.write(content)
    logger.info(f"Markdown file saved to: {output_path}")
    return output_path


def save_table(frame: pd.DataFrame, filename: PathLike, output_dir: Optional[PathLike] = None) -> Path:
    """Writes a columnar CSV table."""
    output_path = _output_path(filename, ".csv", output_dir)
    frame.to_csv(output_path, index=False, float_format="%.17g")
    logger.info(f"Table saved to: {output_path} ({len(frame)} rows)")
    return output_path


def load_document(path: PathLike) -> Any:
    """Reads a JSON or YAML document, chosen by file extension."""
    path = Path(path)
    if not path.exists():
        raise DataParseError(f"File not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            if path.suffix.lower() in (".yaml", ".yml"):
                return yaml.safe_load(f)
            return json.load(f)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise DataParseError(f"Could not parse {path}: {e}") from e


def markdown_table(frame: pd.DataFrame, float_format: str = "{:.4g}") -> str:
    """Renders a DataFrame as a GitHub-style Markdown table."""
    headers = [str(c) for c in frame.columns]
    lines = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
    for _, row in frame.iterrows():
        cells = [float_format.format(v) if isinstance(v, float) else str(v) for v in row.tolist()]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
