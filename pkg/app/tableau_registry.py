"""
Tableau Registry
Resolves Butcher tableaus by name from the built-ins and from JSON documents
{name, s, A, b, c} in the local tableaus/ directory. Local documents take
precedence over built-ins of the same name.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ValidationError

from app.conserva_errors import TableauError, UnknownTableauError
from app.pseudo_time import BUILTIN_TABLEAUS, ButcherTableau


class TableauDocument(BaseModel):
    """On-disk form of an explicit RK method"""
    name: str
    s: int
    A: List[List[float]]
    b: List[float]
    c: List[float]

    def to_tableau(self, source: Optional[Path] = None) -> ButcherTableau:
        if self.s != len(self.b):
            raise TableauError(f"Tableau '{self.name}' declares s={self.s} but has {len(self.b)} weights", source)
        if any(len(row) != self.s for row in self.A) or len(self.A) != self.s:
            raise TableauError(f"Tableau '{self.name}': A is not {self.s} x {self.s}", source)
        return ButcherTableau(self.name, self.A, self.b, self.c)


def load_tableau_file(path: Path) -> ButcherTableau:
    """Parse and validate one tableau document"""
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise TableauError(f"Tableau file not found: {path}", path)
    except json.JSONDecodeError as e:
        raise TableauError(f"Invalid JSON at line {e.lineno}: {e.msg}", path)

    try:
        document = TableauDocument.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise TableauError(f"{first['msg']} (field: {location})", path)
    return document.to_tableau(path)


class TableauRegistry:
    """Built-in and local tableaus, looked up case-insensitively"""

    def __init__(self, local_dir: Optional[Path] = None, debug: bool = False):
        self.local_dir = Path(local_dir) if local_dir else None
        self.debug = debug
        self._cache: Optional[Dict[str, ButcherTableau]] = None

    def load(self) -> Dict[str, ButcherTableau]:
        if self._cache is not None:
            return self._cache

        tableaus: Dict[str, ButcherTableau] = dict(BUILTIN_TABLEAUS)

        # Local documents override built-ins
        if self.local_dir and self.local_dir.is_dir():
            for path in sorted(self.local_dir.glob("*.json")):
                try:
                    tab = load_tableau_file(path)
                except TableauError as e:
                    if self.debug:
                        print(f"Warning: skipping tableau {path.name}: {e.message}")
                    continue
                tableaus[tab.name] = tab
                if self.debug:
                    print(f"Loaded tableau '{tab.name}' from {path}")

        self._cache = tableaus
        return tableaus

    def names(self) -> List[str]:
        return sorted(self.load())

    def get(self, name: str) -> ButcherTableau:
        """Look up by name (case-insensitive) or load a path to a tableau document"""
        tableaus = self.load()
        if name in tableaus:
            return tableaus[name]

        name_lower = name.lower()
        for key, tab in tableaus.items():
            if key.lower() == name_lower:
                return tab

        candidate = Path(name).expanduser()
        if candidate.suffix == ".json" and candidate.exists():
            return load_tableau_file(candidate)

        raise UnknownTableauError(name, list(tableaus))
