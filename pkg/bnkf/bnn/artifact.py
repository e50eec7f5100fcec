import json
import logging
from pathlib import Path

import pandas as pd

from ..errors import ModelError
from .model import BnnModel


__all__ = (
    "MODEL_FORMAT",
    "MODEL_VERSION",
    "save_model",
    "load_model",
    "write_trace",
)


LOGGER = logging.getLogger(__name__)

MODEL_FORMAT = "bnkf-model"
MODEL_VERSION = 1


def save_model(model: BnnModel, path) -> Path:
    '''
    Writes a model as a JSON document.

    Floats are emitted with their shortest exact ``repr``, so
    :func:`load_model` restores every parameter bit for bit.
    '''
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "model": model.to_dict()}
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        json.dump(document, fp, sort_keys=True)
        fp.write("\n")
    LOGGER.debug("Saved %r to %s", model, path)
    return path


def load_model(path) -> BnnModel:
    '''
    Raises
    ------
    ModelError
        the file is not a supported model document
    '''
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fp:
            document = json.load(fp)
    except json.JSONDecodeError as e:
        raise ModelError('{} is not a model document: {}'.format(path, e)) from None
    if not isinstance(document, dict) or document.get("format") != MODEL_FORMAT:
        raise ModelError('{} is not a {} document'.format(path, MODEL_FORMAT))
    if document.get("version") != MODEL_VERSION:
        raise ModelError('{}: unsupported model version {!r}'.format(path, document.get("version")))
    return BnnModel.from_dict(document["model"])


def write_trace(model: BnnModel, path) -> Path:
    """Writes the per-epoch training loss records as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(model.trace, columns=["epoch", "loss", "mse", "kl_term"])
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path
