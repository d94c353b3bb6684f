"""Plain-text data files, key-value config files, and JSON manifests."""

from __future__ import annotations

import configparser
import json

import numpy as np

from .survey import Survey, survey_from_rows

DATA_HEADER = "# dcinv data v1"


def save_data(path, survey: Survey, values: np.ndarray, std: np.ndarray) -> None:
    """One datum per line: ``Ax Bx Mx Nx value std``."""
    values = np.asarray(values, dtype=float)
    std = np.asarray(std, dtype=float)
    if values.size != survey.n_data or std.size != survey.n_data:
        raise ValueError("values/std length must match the survey datum count")
    e = survey.electrodes
    with open(path, "w") as f:
        f.write(f"{DATA_HEADER} n_data={survey.n_data}\n")
        k = 0
        for (a, b), rx in zip(survey.sources, survey.receivers):
            for m, n in rx:
                f.write(f"{e[a]:.10g} {e[b]:.10g} {e[m]:.10g} {e[n]:.10g} "
                        f"{float(values[k])!r} {float(std[k])!r}\n")
                k += 1


def load_data(path):
    """Returns (survey, values, std) parsed from a data file."""
    rows = []
    vals = []
    stds = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            if len(tok) != 6:
                raise ValueError(f"expected 6 columns per datum, got {len(tok)}")
            rows.append([float(t) for t in tok[:4]])
            vals.append(float(tok[4]))
            stds.append(float(tok[5]))
    survey = survey_from_rows(np.asarray(rows))
    return survey, np.asarray(vals), np.asarray(stds)


def load_config(path) -> dict[str, dict[str, str]]:
    """Flat key-value config with one section per module."""
    parser = configparser.ConfigParser()
    with open(path) as f:
        parser.read_file(f)
    return {section: dict(parser[section]) for section in parser.sections()}


def save_manifest(path, manifest: dict) -> None:
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def load_manifest(path) -> dict:
    with open(path) as f:
        return json.load(f)
