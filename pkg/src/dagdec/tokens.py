"""Token tables: subword vocabularies with start-of-word marking.

A token table maps dense integer ids to surface strings and records the
three markers the decoders need: the start-of-word mark carried by
word-initial subword pieces, and the end/start-of-sequence token ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

TOKEN_TABLE_VERSION = 1


class TokenTableError(ValueError):
    """Raised for malformed token table files or inconsistent entries."""


@dataclass(frozen=True)
class TokenTable:
    """Immutable id -> surface mapping with sow/eos/sos markers."""

    surfaces: tuple[str, ...]
    sow_mark: str
    eos_id: int
    sos_id: int
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.surfaces:
            raise TokenTableError("token table is empty")
        for i, s in enumerate(self.surfaces):
            if not s:
                raise TokenTableError(f"token {i} has an empty surface")
        if not self.sow_mark:
            raise TokenTableError("start-of-word mark is empty")
        for name, tid in (("eos", self.eos_id), ("sos", self.sos_id)):
            if not 0 <= tid < len(self.surfaces):
                raise TokenTableError(f"{name} id {tid} out of range")
        index: dict[str, int] = {}
        for i, s in enumerate(self.surfaces):
            if s in index:
                raise TokenTableError(f"duplicate surface {s!r} (ids {index[s]}, {i})")
            index[s] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.surfaces)

    def surface(self, token_id: int) -> str:
        return self.surfaces[token_id]

    def lookup(self, surface: str) -> int | None:
        """Return the id of an exact surface string, or None."""
        return self._index.get(surface)

    def detokenize(self, token_ids: list[int] | tuple[int, ...]) -> str:
        """Join token surfaces into text, turning sow marks into spaces.

        sos/eos tokens are dropped; they delimit sequences, not words.
        """
        parts = []
        for tid in token_ids:
            if tid == self.eos_id or tid == self.sos_id:
                continue
            parts.append(self.surfaces[tid])
        return "".join(parts).replace(self.sow_mark, " ").strip()


def load_token_table(text: str) -> TokenTable:
    """Parse the versioned `id<TAB>surface` token table format."""
    sow_mark = ""
    eos_id = sos_id = -1
    version = None
    entries: dict[int, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(" ")
            if key == "version":
                version = value
            elif key == "sow":
                sow_mark = value
            elif key == "eos":
                eos_id = int(value)
            elif key == "sos":
                sos_id = int(value)
            else:
                raise TokenTableError(f"line {lineno}: unknown header #{key}")
            continue
        tid_str, sep, surface = line.partition("\t")
        if not sep:
            raise TokenTableError(f"line {lineno}: expected id<TAB>surface")
        tid = int(tid_str)
        if tid in entries:
            raise TokenTableError(f"line {lineno}: duplicate id {tid}")
        entries[tid] = surface
    if version != str(TOKEN_TABLE_VERSION):
        raise TokenTableError(f"unsupported token table version {version!r}")
    if sorted(entries) != list(range(len(entries))):
        missing = sorted(set(range(len(entries))) - set(entries))
        raise TokenTableError(f"ids are not dense 0..N-1 (first gap near {missing[:1]})")
    surfaces = tuple(entries[i] for i in range(len(entries)))
    return TokenTable(surfaces=surfaces, sow_mark=sow_mark, eos_id=eos_id, sos_id=sos_id)


def dump_token_table(table: TokenTable) -> str:
    lines = [
        f"#version {TOKEN_TABLE_VERSION}",
        f"#sow {table.sow_mark}",
        f"#eos {table.eos_id}",
        f"#sos {table.sos_id}",
    ]
    lines.extend(f"{i}\t{s}" for i, s in enumerate(table.surfaces))
    return "\n".join(lines) + "\n"


def read_token_table(path: str) -> TokenTable:
    with open(path, encoding="utf-8") as fh:
        return load_token_table(fh.read())


def write_token_table(table: TokenTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_token_table(table))
