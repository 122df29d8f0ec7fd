#include "cdstore/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <memory>

#include "cdstore/error.hpp"

namespace cdstore::crypto {

Digest sha256(ByteView data) {
  Digest out;
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Digest sha256(ByteView prefix, ByteView data) {
  if (prefix.empty()) return sha256(data);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  Digest out;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), prefix.data(), prefix.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), nullptr) != 1)
    fail(Errc::io, "SHA-256 failed");
  return out;
}

void aes256_ctr_xor(const Digest& key, ByteView in, MutableByteView out) {
  require(out.size() == in.size(), "aes256_ctr_xor: size mismatch");
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(),
                                                                      &EVP_CIPHER_CTX_free);
  static constexpr std::uint8_t kZeroIv[16] = {};
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_ctr(), nullptr, key.data(), kZeroIv) != 1)
    fail(Errc::io, "AES-256-CTR initialisation failed");
  std::size_t done = 0;
  // EVP takes int lengths.
  while (done < in.size()) {
    int chunk = static_cast<int>(std::min<std::size_t>(in.size() - done, 1 << 30));
    int written = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data() + done, &written, in.data() + done, chunk) != 1)
      fail(Errc::io, "AES-256-CTR update failed");
    done += static_cast<std::size_t>(written);
  }
}

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1)
    fail(Errc::io, "RAND_bytes failed");
  return out;
}

}  // namespace cdstore::crypto
