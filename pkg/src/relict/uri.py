"""URI normalization.

Two URIs name the same page when their normalized forms are equal:
scheme and host are lowercased, default ports and fragments are dropped,
an empty path loses its trailing slash and a leading ``www.`` is removed.
"""

from __future__ import annotations

from urllib.parse import urlsplit, urlunsplit

from .errors import InvalidURI

_DEFAULT_PORTS = {"http": 80, "https": 443, "ftp": 21}


def normalize_uri(uri: str) -> str:
    if uri is None or not str(uri).strip():
        raise InvalidURI("empty URI")
    raw = str(uri).strip()
    if "://" not in raw:
        # bare host names such as "smiledesigners.org"
        raw = "http://" + raw
    try:
        parts = urlsplit(raw)
        port = parts.port
    except ValueError as exc:
        raise InvalidURI(f"unparseable URI {uri!r}: {exc}") from None
    scheme = parts.scheme.lower()
    host = (parts.hostname or "").lower()
    if not host:
        raise InvalidURI(f"URI without host: {uri!r}")
    if host.startswith("www."):
        host = host[4:]
    netloc = host
    if port is not None and port != _DEFAULT_PORTS.get(scheme):
        netloc = f"{host}:{port}"
    if parts.username:
        userinfo = parts.username + (f":{parts.password}" if parts.password else "")
        netloc = f"{userinfo}@{netloc}"
    path = parts.path
    if path == "/":
        path = ""
    return urlunsplit((scheme, netloc, path, parts.query, ""))


def same_page(a: str, b: str) -> bool:
    try:
        return normalize_uri(a) == normalize_uri(b)
    except InvalidURI:
        return False
