"""Dataset manifest: where the domain folders live and how to read them."""

import re
from dataclasses import dataclass, field
from pathlib import Path

from uwtranslate.data.image_io import RASTER_EXTENSIONS, list_rasters
from uwtranslate.errors import DataError

ROLE_UNIFORM_LIGHTING = "uniform_lighting"
ROLE_UNDERWATER = "underwater"
ROLE_DEPTH = "depth"
ROLE_ALIGNED = "aligned"

MATCHERS = ("basename", "numeric_suffix")

_TRAILING_DIGITS = re.compile(r"(\d+)$")


def _default_folders() -> dict[str, str]:
    # VAROS keeps underwater renders in A and uniform-lighting renders in B.
    return {ROLE_UNIFORM_LIGHTING: "B", ROLE_UNDERWATER: "A", ROLE_DEPTH: "depth"}


def sequence_id(path: Path) -> int:
    """Trailing integer of a file stem (``scene_01011.png`` -> 1011).

    Raises:
        DataError: If the stem does not end in digits.
    """
    match = _TRAILING_DIGITS.search(path.stem)
    if match is None:
        raise DataError(f"file name has no numeric sequence id: {path.name}")
    return int(match.group(1))


@dataclass(frozen=True)
class DatasetManifest:
    """Layout of a VAROS-style dataset: ``root/{A,B,depth}/<scene_id>.<ext>``."""

    root: Path
    folders: dict[str, str] = field(default_factory=_default_folders)
    depth_range: tuple[float, float] = (0.0, 65535.0)
    image_size: int = 256
    matcher: str = "basename"
    extensions: tuple[str, ...] = RASTER_EXTENSIONS

    def __post_init__(self) -> None:
        object.__setattr__(self, "root", Path(self.root))
        object.__setattr__(self, "folders", {**_default_folders(), **dict(self.folders)})
        object.__setattr__(self, "depth_range", tuple(float(v) for v in self.depth_range))
        object.__setattr__(self, "extensions", tuple(e.lower() for e in self.extensions))
        if self.matcher not in MATCHERS:
            raise DataError(f"unknown matcher {self.matcher!r}; expected one of {list(MATCHERS)}")
        if not self.depth_range[1] > self.depth_range[0]:
            raise DataError(f"depth_range must satisfy max > min, got {list(self.depth_range)}")
        if self.image_size < 4 or self.image_size % 4 != 0:
            raise DataError(f"image_size must be a positive multiple of 4, got {self.image_size}")

    def folder(self, role: str) -> Path:
        if role not in self.folders:
            raise DataError(f"manifest declares no folder for role {role!r}")
        return self.root / self.folders[role]

    def has_role(self, role: str) -> bool:
        """True when the role's folder exists and holds at least one raster."""
        if role not in self.folders:
            return False
        folder = self.folder(role)
        return folder.is_dir() and bool(list_rasters(folder, self.extensions))

    def ensure_roles(self, *roles: str) -> None:
        """Check that every referenced folder exists and is non-empty.

        Raises:
            DataError: Naming every missing or empty folder.
        """
        problems = []
        for role in roles:
            folder = self.folder(role)
            if not folder.is_dir():
                problems.append(f"{role}: folder {folder} does not exist")
            elif not list_rasters(folder, self.extensions):
                problems.append(f"{role}: folder {folder} is empty")
        if problems:
            raise DataError("dataset manifest check failed: " + "; ".join(problems))

    def list_files(self, role: str) -> list[Path]:
        return list_rasters(self.folder(role), self.extensions)

    def match_key(self, path: Path) -> str:
        """Key used to pair files across folders."""
        if self.matcher == "numeric_suffix":
            return str(sequence_id(path))
        return path.stem
