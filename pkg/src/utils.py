import json
import os
from typing import Any, Dict, Union

import pandas as pd
import yaml

from utils.ml_logging import get_logger

# Set up logging
logger = get_logger("rebalancing.io")


def load_yaml(config_file: Union[str, os.PathLike]) -> Dict[str, Any]:
    """
    Load a YAML (or JSON) configuration file.

    :param config_file: Path to the file.
    :return: Parsed mapping; an empty file yields an empty dict.
    :raises FileNotFoundError: If the file does not exist.
    """
    if not os.path.exists(config_file):
        logger.error(f"Configuration file {config_file} not found.")
        raise FileNotFoundError(f"Configuration file {config_file} not found.")

    with open(config_file, "r", encoding="utf-8") as file:
        return yaml.safe_load(file) or {}


def write_json(payload: Any, path: Union[str, os.PathLike]) -> None:
    """
    Write ``payload`` as indented, key-sorted JSON so equal payloads give equal bytes.
    """
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=4, sort_keys=True)
        f.write("\n")


def save_dataframe(
    df: pd.DataFrame, path: Union[str, os.PathLike], file_format: str = "csv"
) -> None:
    """
    Save the given dataframe to the specified path in the desired format.

    :param df: Input DataFrame.
    :param path: The path where the dataframe should be saved.
    :param file_format: 'csv' (default) or 'parquet'.
    :raises ValueError: If the specified file format is unsupported.
    """
    try:
        if file_format == "csv":
            df.to_csv(path, index=False)
            logger.info(f"DataFrame saved successfully at {path} in CSV format.")
        elif file_format == "parquet":
            df.to_parquet(path, index=False)
            logger.info(f"DataFrame saved successfully at {path} in Parquet format.")
        else:
            raise ValueError(
                f"Unsupported file format: {file_format}. Supported formats are: ['csv', 'parquet']."
            )
    except Exception as e:
        logger.error(f"Error while saving DataFrame: {e}")
        raise


def load_dataframe_from_path(path: Union[str, os.PathLike], **read_kwargs: Any) -> pd.DataFrame:
    """
    Load a dataframe from the specified path based on the file's extension.

    :param path: The path from where the dataframe should be loaded.
    :param read_kwargs: Extra keyword arguments for the pandas reader.
    :return: Loaded DataFrame.
    :raises ValueError: If the file format (determined by its extension) is unsupported.
    """
    _, file_extension = os.path.splitext(os.fspath(path))
    try:
        logger.info(f"Loading DataFrame from {path}.")
        if file_extension == ".csv":
            df = pd.read_csv(path, **read_kwargs)
        elif file_extension == ".parquet":
            df = pd.read_parquet(path, **read_kwargs)
        else:
            raise ValueError(
                f"Unsupported file format: {file_extension}. Supported formats are: ['.csv', '.parquet']."
            )
        logger.info(f"DataFrame loaded successfully from {path}.")
        return df
    except Exception as e:
        logger.error(f"Error occurred while loading DataFrame from {path}: {e}")
        raise e
