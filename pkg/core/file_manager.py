"""
File management module for reports and shell exports.
"""
import csv
import io
import json
import logging
import os
import struct

import numpy as np

from core.sphere_lattice import SphereShell

logger = logging.getLogger(__name__)

SHELL_MAGIC = b"SHEL"
# magic, n (u8), lambda (u64), count (u64)
SHELL_HEADER = struct.Struct("<4sBQQ")


class FileManager:
    """
    Class for managing file operations.
    """
    @staticmethod
    def ensure_directory_exists(directory):
        """
        Ensures that the directory exists, creating it if necessary.

        Args:
            directory (str): Directory path

        Returns:
            bool: True if the directory exists or is created successfully, False otherwise
        """
        try:
            os.makedirs(directory, exist_ok=True)
            return True
        except OSError as e:
            logger.error("Could not create %s: %s", directory, e)
            return False

    @staticmethod
    def _parent(file_path):
        return os.path.dirname(os.path.abspath(file_path))

    @staticmethod
    def save_text_file(text, file_path):
        """
        Saves text to a file with LF line endings.

        Args:
            text (str): Text to be saved
            file_path (str): File path

        Returns:
            bool: True if the file is saved successfully, False otherwise
        """
        try:
            os.makedirs(FileManager._parent(file_path), exist_ok=True)
            with open(file_path, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
            return True
        except OSError as e:
            logger.error("Could not write %s: %s", file_path, e)
            return False

    @staticmethod
    def json_text(data):
        """
        Serializes data deterministically (sorted keys, fixed separators).

        Args:
            data (dict): JSON-ready data

        Returns:
            str: JSON text ending in a newline
        """
        return json.dumps(data, sort_keys=True, indent=2, allow_nan=True) + "\n"

    @staticmethod
    def csv_text(rows):
        """
        Comma-separated text with a header row taken from the union of keys.

        Args:
            rows (list): List of flat dicts

        Returns:
            str: CSV text with LF line endings
        """
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
        return buffer.getvalue()

    @staticmethod
    def write_json(data, file_path):
        """Writes data as deterministic JSON. Returns True on success."""
        return FileManager.save_text_file(FileManager.json_text(data), file_path)

    @staticmethod
    def write_csv(rows, file_path):
        """Writes flat rows as CSV. Returns True on success."""
        return FileManager.save_text_file(FileManager.csv_text(rows), file_path)

    @staticmethod
    def write_report(report, file_path, fmt="json"):
        """
        Writes an ExperimentReport as JSON or as flat CSV rows.

        Args:
            report (ExperimentReport): Report to write
            file_path (str): Output path
            fmt (str): "json" or "csv"

        Returns:
            bool: True if the file is saved successfully, False otherwise
        """
        if fmt == "csv":
            return FileManager.write_csv(report.flat_rows(), file_path)
        return FileManager.write_json(report.to_dict(), file_path)

    @staticmethod
    def write_shell_csv(shell, file_path):
        """Writes shell points as CSV with columns x1..xn."""
        rows = [{f"x{i + 1}": int(v) for i, v in enumerate(point)} for point in shell.points.tolist()]
        if not rows:
            return FileManager.save_text_file(",".join(f"x{i + 1}" for i in range(shell.n)) + "\n", file_path)
        return FileManager.write_csv(rows, file_path)

    @staticmethod
    def write_shell_binary(shell, file_path):
        """
        Writes a shell in the SHEL format: the header, then little-endian int16
        coordinates row by row.

        Args:
            shell (SphereShell): Shell to write
            file_path (str): Output path

        Returns:
            bool: True if the file is saved successfully, False otherwise
        """
        try:
            os.makedirs(FileManager._parent(file_path), exist_ok=True)
            with open(file_path, "wb") as f:
                f.write(SHELL_HEADER.pack(SHELL_MAGIC, shell.n, shell.lam, len(shell)))
                f.write(np.ascontiguousarray(shell.points, dtype="<i2").tobytes())
            return True
        except OSError as e:
            logger.error("Could not write %s: %s", file_path, e)
            return False

    @staticmethod
    def read_shell_binary(file_path):
        """
        Reads a shell written by write_shell_binary.

        Args:
            file_path (str): Input path

        Returns:
            SphereShell: The stored shell

        Raises:
            ValueError: If the file is not a complete SHEL file
        """
        with open(file_path, "rb") as f:
            data = f.read()
        if len(data) < SHELL_HEADER.size:
            raise ValueError(f"{file_path}: truncated header")
        magic, n, lam, count = SHELL_HEADER.unpack_from(data)
        if magic != SHELL_MAGIC:
            raise ValueError(f"{file_path}: not a shell file")
        body = data[SHELL_HEADER.size:]
        if len(body) != 2 * n * count:
            raise ValueError(f"{file_path}: expected {count} points of dimension {n}")
        points = np.frombuffer(body, dtype="<i2").astype(np.int16).reshape(count, n)
        points.setflags(write=False)
        return SphereShell(n, lam, points)
