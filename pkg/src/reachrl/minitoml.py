"""Minimal TOML reader/writer for run configuration files.

Python 3.10 has no stdlib TOML parser and this environment's package
mirror carries none, so the subset the config files actually use is
implemented here: bare keys, [dotted.table] headers, strings, integers,
floats, booleans, and flat arrays, with # comments. No dates, no inline
tables, no arrays of tables, no multiline strings.

dumps() emits a canonical form (scalars before subtables, insertion
order preserved, floats via repr) so parse -> dump -> parse is exact.
"""

from __future__ import annotations

import re

_BARE_KEY = re.compile(r"^[A-Za-z0-9_-]+$")
_INT = re.compile(r"^[+-]?\d+$")


class TomlError(ValueError):
    pass


def _split_top_level(text: str, line_no: int) -> list[str]:
    """Split an array body on commas not inside strings."""
    parts = []
    depth = 0
    in_str = False
    cur = []
    i = 0
    while i < len(text):
        ch = text[i]
        if in_str:
            if ch == "\\":
                cur.append(text[i:i + 2])
                i += 2
                continue
            if ch == '"':
                in_str = False
            cur.append(ch)
        elif ch == '"':
            in_str = True
            cur.append(ch)
        elif ch == "[":
            depth += 1
            cur.append(ch)
        elif ch == "]":
            depth -= 1
            cur.append(ch)
        elif ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        i += 1
    if in_str:
        raise TomlError(f"line {line_no}: unterminated string in array")
    tail = "".join(cur).strip()
    if tail:
        parts.append(tail)
    return [p.strip() for p in parts if p.strip()]


def _parse_string(text: str, line_no: int) -> str:
    body = text[1:-1]
    out = []
    i = 0
    escapes = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            if i + 1 >= len(body) or body[i + 1] not in escapes:
                raise TomlError(f"line {line_no}: bad escape in string")
            out.append(escapes[body[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def parse_value(text: str, line_no: int = 0):
    text = text.strip()
    if not text:
        raise TomlError(f"line {line_no}: empty value")
    if text.startswith('"'):
        if len(text) < 2 or not text.endswith('"'):
            raise TomlError(f"line {line_no}: unterminated string")
        return _parse_string(text, line_no)
    if text.startswith("["):
        if not text.endswith("]"):
            raise TomlError(f"line {line_no}: unterminated array")
        return [parse_value(p, line_no) for p in
                _split_top_level(text[1:-1], line_no)]
    if text == "true":
        return True
    if text == "false":
        return False
    if _INT.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        raise TomlError(f"line {line_no}: cannot parse value {text!r}") from None


def _strip_comment(line: str) -> str:
    in_str = False
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == "\\" and in_str:
            i += 2
            continue
        if ch == '"':
            in_str = not in_str
        elif ch == "#" and not in_str:
            return line[:i]
        i += 1
    return line


def loads(text: str) -> dict:
    root: dict = {}
    table = root
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise TomlError(f"line {line_no}: malformed table header")
            path = line[1:-1].strip()
            if not path:
                raise TomlError(f"line {line_no}: empty table name")
            table = root
            for part in path.split("."):
                if not _BARE_KEY.match(part):
                    raise TomlError(f"line {line_no}: bad table name {part!r}")
                table = table.setdefault(part, {})
                if not isinstance(table, dict):
                    raise TomlError(f"line {line_no}: {part!r} is not a table")
            continue
        if "=" not in line:
            raise TomlError(f"line {line_no}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if not _BARE_KEY.match(key):
            raise TomlError(f"line {line_no}: bad key {key!r}")
        if key in table:
            raise TomlError(f"line {line_no}: duplicate key {key!r}")
        table[key] = parse_value(value, line_no)
    return root


def load(path) -> dict:
    with open(path, encoding="utf-8") as f:
        return loads(f.read())


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        escaped = (value.replace("\\", "\\\\").replace('"', '\\"')
                   .replace("\n", "\\n").replace("\t", "\\t"))
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise TomlError(f"cannot serialise value of type {type(value).__name__}")


def dumps(data: dict) -> str:
    lines: list[str] = []

    def emit(table: dict, prefix: str):
        subtables = []
        for key, value in table.items():
            if not _BARE_KEY.match(str(key)):
                raise TomlError(f"cannot serialise key {key!r}")
            if isinstance(value, dict):
                subtables.append((key, value))
            else:
                lines.append(f"{key} = {_format_value(value)}")
        for key, sub in subtables:
            name = f"{prefix}.{key}" if prefix else key
            lines.append("")
            lines.append(f"[{name}]")
            emit(sub, name)

    emit(data, "")
    return "\n".join(lines).lstrip("\n") + "\n"


def dump(data: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(data))
