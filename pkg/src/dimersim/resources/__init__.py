__all__ = ['get_resource_path', 'load_figure_presets']

import json
import os
from typing import Dict, List

HERE = os.path.dirname(os.path.abspath(__file__))

FIGURE_PRESETS = 'figure_presets.json'


def get_resource_path(filename: str) -> str:
    """Get the absolute path to a resource file."""
    return os.path.join(HERE, filename)


def load_figure_presets() -> List[Dict]:
    """Named run configurations that regenerate the data behind each figure."""
    with open(get_resource_path(FIGURE_PRESETS), 'r') as fh:
        return json.load(fh)['presets']
