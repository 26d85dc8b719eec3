#include "proxauth/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace proxauth::crypto {

namespace {

Salt make_fixed_salt(std::string_view tag) {
  Salt s;
  if (tag.size() != s.v.size()) throw std::logic_error("fixed salt must be 16 bytes");
  std::memcpy(s.v.data(), tag.data(), s.v.size());
  return s;
}

struct CipherCtxFree {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;

}  // namespace

const Salt kNonceSalt = make_fixed_salt("proxauth-n1-salt");
const Salt kAppIdSalt = make_fixed_salt("proxauth-id-salt");
const Salt kBtSalt = make_fixed_salt("proxauth-bt-salt");

std::optional<SecretKey> SecretKey::from_bytes(ByteView b) {
  if (b.size() != 32) return std::nullopt;
  SecretKey k;
  std::copy(b.begin(), b.end(), k.v.begin());
  return k;
}

std::optional<Salt> Salt::from_bytes(ByteView b) {
  if (b.size() != 16) return std::nullopt;
  Salt s;
  std::copy(b.begin(), b.end(), s.v.begin());
  return s;
}

std::optional<SessionId> SessionId::from_bytes(ByteView b) {
  if (b.size() != 16) return std::nullopt;
  SessionId s;
  std::copy(b.begin(), b.end(), s.v.begin());
  return s;
}

std::optional<ReplayToken> ReplayToken::from_bytes(ByteView b) {
  if (b.size() != 16) return std::nullopt;
  ReplayToken t;
  std::copy(b.begin(), b.end(), t.v.begin());
  return t;
}

std::optional<Nonce10> Nonce10::parse(std::string_view s) {
  if (s.size() != 10) return std::nullopt;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  return Nonce10{std::string(s)};
}

Bytes EncryptedEnvelope::to_bytes() const {
  Bytes out;
  out.reserve(iv.size() + mac.size() + ct.size());
  out.insert(out.end(), iv.begin(), iv.end());
  out.insert(out.end(), mac.begin(), mac.end());
  out.insert(out.end(), ct.begin(), ct.end());
  return out;
}

std::optional<EncryptedEnvelope> EncryptedEnvelope::parse(ByteView wire) {
  if (wire.size() < 16 + 32 + 16) return std::nullopt;
  if ((wire.size() - 48) % 16 != 0) return std::nullopt;
  EncryptedEnvelope env;
  std::copy(wire.begin(), wire.begin() + 16, env.iv.begin());
  std::copy(wire.begin() + 16, wire.begin() + 48, env.mac.begin());
  env.ct.assign(wire.begin() + 48, wire.end());
  return env;
}

SecretKey gen_secret(Csprng& rng) {
  SecretKey k;
  rng.fill(k.v);
  return k;
}

Salt gen_salt(Csprng& rng) {
  Salt s;
  rng.fill(s.v);
  return s;
}

SessionId gen_session_id(Csprng& rng) {
  SessionId s;
  rng.fill(s.v);
  return s;
}

ReplayToken gen_token(Csprng& rng) {
  ReplayToken t;
  rng.fill(t.v);
  return t;
}

Nonce10 gen_nonce10(Csprng& rng) {
  Nonce10 n;
  n.digits.resize(10);
  for (char& c : n.digits) {
    c = static_cast<char>('0' + rng.uniform(10));
  }
  return n;
}

Nonce10 increment(const Nonce10& n) {
  Nonce10 out = n;
  for (int i = 9; i >= 0; --i) {
    if (out.digits[i] != '9') {
      ++out.digits[i];
      return out;
    }
    out.digits[i] = '0';
  }
  return out;  // wrapped: all nines -> all zeros
}

Bytes hmac_sha256(ByteView key, ByteView data) {
  Bytes out(32);
  unsigned int out_len = 32;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(),
       data.size(), out.data(), &out_len);
  return out;
}

KeyPair derive_keys(const SecretKey& k, const Nonce10& n) {
  KeyPair kp;
  Bytes e = hmac_sha256(k.v, to_bytes(n.digits));
  Bytes m = hmac_sha256(k.v, to_bytes(increment(n).digits));
  std::copy(e.begin(), e.end(), kp.enc_key.begin());
  std::copy(m.begin(), m.end(), kp.mac_key.begin());
  return kp;
}

Expected<KeyPair> derive_key_from_password(ByteView secret_material, const Salt& salt) {
  if (secret_material.empty()) {
    return Error(Err::EmptyKeyMaterial, "secret material must be non-empty");
  }
  Bytes data_e(salt.v.begin(), salt.v.end());
  data_e.push_back(0x00);
  Bytes data_m(salt.v.begin(), salt.v.end());
  data_m.push_back(0x01);
  KeyPair kp;
  Bytes e = hmac_sha256(secret_material, data_e);
  Bytes m = hmac_sha256(secret_material, data_m);
  std::copy(e.begin(), e.end(), kp.enc_key.begin());
  std::copy(m.begin(), m.end(), kp.mac_key.begin());
  return kp;
}

KeyPair derive_bt_key(std::string_view bt_canonical, ByteView context) {
  Bytes material = to_bytes(bt_canonical);
  material.insert(material.end(), context.begin(), context.end());
  return derive_key_from_password(material, kBtSalt).value();
}

KeyPair keys_from_secret(const SecretKey& k) {
  return derive_key_from_password(k.v, kAppIdSalt).value();
}

KeyPair keys_from_nonce(const Nonce10& n) {
  return derive_key_from_password(to_bytes(n.digits), kNonceSalt).value();
}

EncryptedEnvelope seal(const KeyPair& keys, ByteView plaintext, Csprng& rng) {
  EncryptedEnvelope env;
  rng.fill(env.iv);

  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_cbc(), nullptr, keys.enc_key.data(),
                         env.iv.data()) != 1) {
    throw std::runtime_error("EVP_EncryptInit_ex failed");
  }
  env.ct.resize(plaintext.size() + 16);
  int len1 = 0;
  if (EVP_EncryptUpdate(ctx.get(), env.ct.data(), &len1, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1) {
    throw std::runtime_error("EVP_EncryptUpdate failed");
  }
  int len2 = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), env.ct.data() + len1, &len2) != 1) {
    throw std::runtime_error("EVP_EncryptFinal_ex failed");
  }
  env.ct.resize(static_cast<size_t>(len1 + len2));

  Bytes mac_input = concat(env.iv, env.ct);
  Bytes mac = hmac_sha256(keys.mac_key, mac_input);
  std::copy(mac.begin(), mac.end(), env.mac.begin());
  return env;
}

Expected<Bytes> open_envelope(const KeyPair& keys, const EncryptedEnvelope& env) {
  if (env.ct.empty() || env.ct.size() % 16 != 0) {
    return Error(Err::MalformedEnvelope, "ciphertext length not a positive multiple of 16");
  }
  Bytes mac_input = concat(env.iv, env.ct);
  Bytes expect = hmac_sha256(keys.mac_key, mac_input);
  if (!ct_equal(expect, env.mac)) {
    return Error(Err::MacMismatch);
  }

  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_cbc(), nullptr, keys.enc_key.data(),
                         env.iv.data()) != 1) {
    throw std::runtime_error("EVP_DecryptInit_ex failed");
  }
  Bytes pt(env.ct.size());
  int len1 = 0;
  if (EVP_DecryptUpdate(ctx.get(), pt.data(), &len1, env.ct.data(),
                        static_cast<int>(env.ct.size())) != 1) {
    return Error(Err::BadPadding, "decrypt update failed after valid MAC");
  }
  int len2 = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), pt.data() + len1, &len2) != 1) {
    return Error(Err::BadPadding, "invalid padding after valid MAC");
  }
  pt.resize(static_cast<size_t>(len1 + len2));
  return pt;
}

}  // namespace proxauth::crypto
