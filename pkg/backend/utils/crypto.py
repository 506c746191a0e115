"""Cryptographic primitives used for reversible redaction and sealed reports.

FF1 follows NIST SP 800-38G on top of the AES block cipher from `cryptography`.
Keys are derived from a salt file and a passphrase held in the environment.
"""

import os

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes, hmac
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.pbkdf2 import PBKDF2HMAC

from config import KDF_ITERATIONS, PASSPHRASE_ENV

from .errors import ConfigError, RedactionError, ReportError

DIGITS = "0123456789"
PRINTABLE_94 = "".join(chr(c) for c in range(0x21, 0x7F))
REPORT_MAGIC = b"KRPT"
NONCE_SIZE = 12


class FF1Cipher:
    """FF1 format-preserving encryption over an arbitrary alphabet."""

    FEISTEL_MIN = 100
    NUM_ROUNDS = 10
    BLOCK_SIZE = 16

    def __init__(self, key: bytes, alphabet: str = DIGITS):
        if len(key) not in (16, 24, 32):
            raise ConfigError("FF1 key must be 128, 192 or 256 bits", field="redaction.key_file")
        if not 2 <= len(alphabet) <= 2**16 or len(set(alphabet)) != len(alphabet):
            raise ConfigError(f"invalid FF1 alphabet of {len(alphabet)} symbols")
        self.key = key
        self.alphabet = alphabet
        self.radix = len(alphabet)
        self._index = {ch: i for i, ch in enumerate(alphabet)}
        self.min_len = self.min_length(self.radix)
        self.max_len = 2**32 - 1

    @classmethod
    def min_length(cls, radix: int) -> int:
        """Shortest input with at least FEISTEL_MIN possible values."""
        length = 1
        while radix**length < cls.FEISTEL_MIN:
            length += 1
        return length

    def _ciph(self, block: bytes) -> bytes:
        encryptor = Cipher(algorithms.AES(self.key), modes.ECB()).encryptor()  # nosec B305
        return encryptor.update(block) + encryptor.finalize()

    def _prf(self, data: bytes) -> bytes:
        encryptor = Cipher(algorithms.AES(self.key), modes.CBC(bytes(self.BLOCK_SIZE))).encryptor()
        return (encryptor.update(data) + encryptor.finalize())[-self.BLOCK_SIZE :]

    def _num(self, digits: list[int]) -> int:
        value = 0
        for digit in digits:
            value = value * self.radix + digit
        return value

    def _str(self, value: int, length: int) -> list[int]:
        digits = [0] * length
        for i in range(length - 1, -1, -1):
            value, digits[i] = divmod(value, self.radix)
        return digits

    def _round_value(self, p_block: bytes, tweak: bytes, round_index: int, half: list[int], b: int, d: int) -> int:
        pad = (-len(tweak) - b - 1) % self.BLOCK_SIZE
        q_block = tweak + bytes(pad) + bytes([round_index]) + self._num(half).to_bytes(b, "big")
        r = self._prf(p_block + q_block)
        s = r
        j = 1
        while len(s) < d:
            s += self._ciph(bytes(x ^ y for x, y in zip(r, j.to_bytes(self.BLOCK_SIZE, "big"))))
            j += 1
        return int.from_bytes(s[:d], "big")

    def _setup(self, n: int, tweak: bytes) -> tuple[int, int, int, int, bytes]:
        if not self.min_len <= n <= self.max_len:
            raise RedactionError(
                f"FF1 input length {n} outside [{self.min_len}, {self.max_len}] for radix {self.radix}"
            )
        u = n // 2
        v = n - u
        b = ((self.radix**v - 1).bit_length() + 7) // 8
        d = 4 * ((b + 3) // 4) + 4
        p_block = (
            bytes([1, 2, 1])
            + self.radix.to_bytes(3, "big")
            + bytes([10, u % 256])
            + n.to_bytes(4, "big")
            + len(tweak).to_bytes(4, "big")
        )
        return u, v, b, d, p_block

    def _to_digits(self, text: str) -> list[int]:
        try:
            return [self._index[ch] for ch in text]
        except KeyError as e:
            raise RedactionError(f"character {e.args[0]!r} outside the FF1 alphabet") from None

    def encrypt(self, plaintext: str, tweak: bytes = b"") -> str:
        x = self._to_digits(plaintext)
        u, v, b, d, p_block = self._setup(len(x), tweak)
        a, bb = x[:u], x[u:]
        for i in range(self.NUM_ROUNDS):
            m = u if i % 2 == 0 else v
            y = self._round_value(p_block, tweak, i, bb, b, d)
            c = (self._num(a) + y) % (self.radix**m)
            a, bb = bb, self._str(c, m)
        return "".join(self.alphabet[i] for i in a + bb)

    def decrypt(self, ciphertext: str, tweak: bytes = b"") -> str:
        x = self._to_digits(ciphertext)
        u, v, b, d, p_block = self._setup(len(x), tweak)
        a, bb = x[:u], x[u:]
        for i in range(self.NUM_ROUNDS - 1, -1, -1):
            m = u if i % 2 == 0 else v
            y = self._round_value(p_block, tweak, i, a, b, d)
            c = (self._num(bb) - y) % (self.radix**m)
            a, bb = self._str(c, m), a
        return "".join(self.alphabet[i] for i in a + bb)


def derive_key(passphrase: str, salt: bytes, iterations: int = KDF_ITERATIONS) -> bytes:
    """PBKDF2-HMAC-SHA256 to a 256-bit key."""
    kdf = PBKDF2HMAC(algorithm=hashes.SHA256(), length=32, salt=salt, iterations=iterations)
    return kdf.derive(passphrase.encode("utf-8"))


def load_key(key_file: str, passphrase_env: str = PASSPHRASE_ENV) -> bytes:
    """Derive the run key from the salt stored in `key_file` and the passphrase env var."""
    if not key_file:
        raise ConfigError("key file required for this policy", field="redaction.key_file")
    if not os.path.exists(key_file):
        raise ConfigError(f"key file not found: {key_file}", field="redaction.key_file")
    passphrase = os.getenv(passphrase_env)
    if not passphrase:
        raise ConfigError(f"environment variable {passphrase_env} is not set", field="redaction.key_file")
    with open(key_file, "rb") as f:
        salt = f.read()
    if len(salt) < 8:
        raise ConfigError("key file must hold at least 8 bytes of salt", field="redaction.key_file")
    return derive_key(passphrase, salt)


def _hmac_sha256(key: bytes, data: bytes) -> bytes:
    h = hmac.HMAC(key, hashes.SHA256())
    h.update(data)
    return h.finalize()


def aes_replacement(plain: bytes, key: bytes) -> str:
    """Deterministic AES-GCM encryption rendered as hex; equal inputs give equal output."""
    nonce = _hmac_sha256(key, plain)[:NONCE_SIZE]
    return (nonce + AESGCM(key).encrypt(nonce, plain, None)).hex()


def decrypt_aes_replacement(replacement: str, key: bytes) -> bytes:
    blob = bytes.fromhex(replacement)
    try:
        return AESGCM(key).decrypt(blob[:NONCE_SIZE], blob[NONCE_SIZE:], None)
    except InvalidTag as e:
        raise RedactionError("AES replacement failed authentication") from e


def seal(data: bytes, key: bytes) -> bytes:
    nonce = os.urandom(NONCE_SIZE)
    return REPORT_MAGIC + nonce + AESGCM(key).encrypt(nonce, data, REPORT_MAGIC)


def unseal(blob: bytes, key: bytes) -> bytes:
    if not blob.startswith(REPORT_MAGIC):
        raise ReportError("sealed report magic mismatch")
    nonce = blob[len(REPORT_MAGIC) : len(REPORT_MAGIC) + NONCE_SIZE]
    try:
        return AESGCM(key).decrypt(nonce, blob[len(REPORT_MAGIC) + NONCE_SIZE :], REPORT_MAGIC)
    except InvalidTag as e:
        raise ReportError("sealed report failed authentication (wrong key?)") from e
