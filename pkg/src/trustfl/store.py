"""In-process content-addressed store.

A CID here is the bare lowercase hex SHA-256 of the content, not an IPFS
multihash. Retrieval re-hashes the bytes and refuses corrupted content.
"""

import hashlib
import re
import threading
from pathlib import Path

CID_RE = re.compile(r"^[0-9a-f]{64}$")


class MissingArtifact(KeyError):
    pass


class CorruptArtifact(RuntimeError):
    pass


def cid_of(content: bytes) -> str:
    return hashlib.sha256(content).hexdigest()


def is_cid(value: str) -> bool:
    return isinstance(value, str) and CID_RE.match(value) is not None


class ContentStore:
    def __init__(self):
        self._blobs: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def put(self, content: bytes) -> str:
        content = bytes(content)
        cid = cid_of(content)
        with self._lock:
            self._blobs.setdefault(cid, content)
        return cid

    def get(self, cid: str) -> bytes:
        try:
            content = self._blobs[cid]
        except KeyError:
            raise MissingArtifact(cid) from None
        if cid_of(content) != cid:
            raise CorruptArtifact(f"content under {cid} does not match its address")
        return content

    def __contains__(self, cid: str) -> bool:
        return cid in self._blobs

    def __len__(self) -> int:
        return len(self._blobs)

    def cids(self) -> list:
        return sorted(self._blobs)

    def dump(self, directory) -> int:
        """Write every artifact to ``directory/<cid>``; returns the count written."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for cid in self.cids():
            (out / cid).write_bytes(self.get(cid))
        return len(self._blobs)

    @classmethod
    def load(cls, directory) -> "ContentStore":
        """Read a dumped directory back. Content is checked lazily, on ``get``."""
        store = cls()
        for path in sorted(Path(directory).iterdir()):
            if is_cid(path.name):
                store._blobs[path.name] = path.read_bytes()
        return store
