# Additive homomorphic encryption: multiply ciphertexts, decrypt a sum.
#
# The second backend replaces share exchanges with one encrypted matrix
# flowing A -> B -> server: B adds its own contribution under encryption and
# only the server (key holder) sees the reconstructed first hidden layer.

import random

from spnn.paillier import SignedEncoder, TEST_KEY_BITS, add_ct, decrypt, encrypt, keygen

rng = random.Random(7)
keys = keygen(TEST_KEY_BITS, rng)  # 512-bit keys keep the demo quick
print("modulus bits:", keys.pk.n.bit_length())

ct5 = encrypt(keys.pk, 5, rng)
ct7 = encrypt(keys.pk, 7, rng)
print("Dec(Enc(5) * Enc(7)) =", decrypt(keys.sk, add_ct(ct5, ct7)))

# encryption is randomised: same plaintext, fresh ciphertext
print("Enc(5) twice differs:", encrypt(keys.pk, 5, rng).value != ct5.value)

# signed fixed-point plaintexts ride in Z_n with the upper half as negatives
enc = SignedEncoder(keys.pk.n)
total = add_ct(
    encrypt(keys.pk, enc.encode_signed(2.5), rng),
    encrypt(keys.pk, enc.encode_signed(-1.25), rng),
)
print("2.5 + (-1.25) homomorphically =", enc.decode_signed(decrypt(keys.sk, total)))

# a longer fold: sum of 100 ones
ones = encrypt(keys.pk, 1, rng)
for _ in range(99):
    ones = add_ct(ones, encrypt(keys.pk, 1, rng))
print("fold of 100 Enc(1):", decrypt(keys.sk, ones))
