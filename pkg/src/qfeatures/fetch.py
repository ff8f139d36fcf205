"""Download and verify the MNIST IDX files.

Checksums of the four uncompressed files live in ``mnist.lock.json``; a
mirror is either a tarball holding the files (``npm-tarball``) or a base URL
serving ``<name>.gz`` (``idx-gz``). Files already present with the right
checksum are never re-downloaded.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import logging
import os
import tarfile
import urllib.request
from importlib import resources
from pathlib import Path

log = logging.getLogger(__name__)

DATA_DIR_ENV = "QFEATURES_DATA_DIR"
MIRROR_ENV = "QFEATURES_MNIST_MIRROR"
LOCK_ENV = "QFEATURES_MNIST_LOCK"

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


class FetchError(RuntimeError):
    pass


class ChecksumError(FetchError):
    pass


def default_data_dir() -> Path:
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "qfeatures" / "mnist"


def load_lock(path=None) -> dict:
    """The packaged lockfile, or ``path`` / ``$QFEATURES_MNIST_LOCK`` if given."""
    path = path or os.environ.get(LOCK_ENV)
    if path is None:
        text = resources.files("qfeatures").joinpath("mnist.lock.json").read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text)


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def verify(data_dir, lock: dict) -> list[str]:
    """Names of files that are missing or fail their checksum."""
    bad = []
    for name, digest in lock["files"].items():
        p = Path(data_dir) / name
        if not p.is_file() or sha256_of(p) != digest:
            bad.append(name)
    return bad


def _download(url: str, opener) -> bytes:
    log.info("downloading %s", url)
    try:
        with opener(url) as resp:
            return resp.read()
    except OSError as exc:
        raise FetchError(f"download failed for {url}: {exc}") from exc


def _resolve_mirror(lock: dict, mirror: str | None, fmt: str | None) -> dict:
    mirror = mirror or os.environ.get(MIRROR_ENV)
    if not mirror:
        return lock["mirrors"][0]
    for entry in lock["mirrors"]:
        if mirror in (entry["name"], entry["url"]):
            return entry
    if fmt is None:
        fmt = "npm-tarball" if mirror.endswith((".tgz", ".tar.gz")) else "idx-gz"
    return {"name": "custom", "format": fmt, "url": mirror, "member_prefix": "package/data/"}


def _write_checked(path: Path, payload: bytes, digest: str) -> None:
    if hashlib.sha256(payload).hexdigest() != digest:
        raise ChecksumError(f"checksum mismatch for {path.name}; refusing to write it")
    tmp = path.with_suffix(".part")
    tmp.write_bytes(payload)
    tmp.replace(path)


def fetch_data(data_dir=None, mirror: str | None = None, fmt: str | None = None,
               lock_path=None, opener=urllib.request.urlopen) -> dict[str, Path]:
    """Ensure the four MNIST files exist in ``data_dir`` with locked checksums."""
    lock = load_lock(lock_path)
    data_dir = Path(data_dir) if data_dir else default_data_dir()
    paths = {name: data_dir / name for name in lock["files"]}
    missing = verify(data_dir, lock)
    if not missing:
        return paths
    data_dir.mkdir(parents=True, exist_ok=True)
    entry = _resolve_mirror(lock, mirror, fmt)

    if entry["format"] == "npm-tarball":
        blob = _download(entry["url"], opener)
        if "sha256" in entry and hashlib.sha256(blob).hexdigest() != entry["sha256"]:
            raise ChecksumError(f"checksum mismatch for archive {entry['url']}")
        try:
            with tarfile.open(fileobj=io.BytesIO(blob), mode="r:*") as tar:
                for name in missing:
                    member = tar.extractfile(entry.get("member_prefix", "") + name)
                    if member is None:
                        raise FetchError(f"{name} not found in {entry['url']}")
                    _write_checked(paths[name], member.read(), lock["files"][name])
        except (tarfile.TarError, KeyError) as exc:
            raise FetchError(f"cannot read archive {entry['url']}: {exc}") from exc
    elif entry["format"] == "idx-gz":
        base = entry["url"].rstrip("/") + "/"
        for name in missing:
            blob = _download(base + name + ".gz", opener)
            try:
                payload = gzip.decompress(blob)
            except OSError as exc:
                raise FetchError(f"{name}.gz is not valid gzip: {exc}") from exc
            _write_checked(paths[name], payload, lock["files"][name])
    else:
        raise FetchError(f"unknown mirror format {entry['format']!r}")

    still_bad = verify(data_dir, lock)
    if still_bad:
        raise ChecksumError(f"files failed verification: {', '.join(still_bad)}")
    return paths
