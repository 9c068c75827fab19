import pytest

from ndnstream.names import VersionedChunkName, name_parse
from ndnstream.packets import Data, KeyMaterial, sign_data, verify_data


def small_data():
    return Data(
        VersionedChunkName(name_parse("/f"), 1, 0),
        content=b"abc",
        final_chunk=2,
        freshness_ms=500,
    )


def test_sign_then_verify(key):
    signed = sign_data(small_data(), key)
    assert verify_data(signed, key)


def test_verify_with_other_key_fails(key):
    signed = sign_data(small_data(), key)
    other = KeyMaterial("other", b"different")
    assert not verify_data(signed, other)


def test_any_single_bit_flip_in_content_falsifies(key):
    signed = sign_data(small_data(), key)
    for i in range(len(signed.content)):
        for bit in range(8):
            mutated = bytearray(signed.content)
            mutated[i] ^= 1 << bit
            tampered = Data(
                signed.name,
                bytes(mutated),
                signed.final_chunk,
                signed.freshness_ms,
                signed.integrity_tag,
            )
            assert not verify_data(tampered, key)


def test_signed_field_changes_falsify(key):
    signed = sign_data(small_data(), key)
    renamed = Data(
        VersionedChunkName(name_parse("/g"), 1, 0),
        signed.content,
        signed.final_chunk,
        signed.freshness_ms,
        signed.integrity_tag,
    )
    assert not verify_data(renamed, key)
    retagged = Data(signed.name, signed.content, signed.final_chunk + 1, signed.freshness_ms, signed.integrity_tag)
    assert not verify_data(retagged, key)
    refreshed = Data(signed.name, signed.content, signed.final_chunk, signed.freshness_ms + 1, signed.integrity_tag)
    assert not verify_data(refreshed, key)


def test_key_requires_secret():
    with pytest.raises(ValueError):
        KeyMaterial("empty", b"")


def test_chunk_beyond_final_rejected():
    with pytest.raises(ValueError):
        Data(VersionedChunkName(name_parse("/f"), 1, 3), b"", final_chunk=2)
