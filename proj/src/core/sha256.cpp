#include "ipaint/core/sha256.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <stdexcept>

#include "ipaint/core/error.hpp"

namespace ipaint {

Sha256::Sha256() {
    EVP_MD_CTX* c = EVP_MD_CTX_new();
    if (!c || EVP_DigestInit_ex(c, EVP_sha256(), nullptr) != 1)
        throw Error("sha256: init failed");
    ctx_ = c;
}

Sha256::~Sha256() {
    if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256::update(const void* data, size_t n) {
    if (done_) throw Error("sha256: update after finalize");
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, n);
}

void Sha256::finalize() {
    if (done_) return;
    out_.resize(32);
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out_.data(), &len);
    done_ = true;
}

std::vector<unsigned char> Sha256::digest() {
    finalize();
    return out_;
}

std::string Sha256::hex() {
    finalize();
    static const char* kHex = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (unsigned char b : out_) {
        s.push_back(kHex[b >> 4]);
        s.push_back(kHex[b & 0xF]);
    }
    return s;
}

std::string sha256_hex(const void* data, size_t n) {
    Sha256 h;
    h.update(data, n);
    return h.hex();
}

std::string sha256_hex_of_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw DataError("sha256: cannot open " + path);
    Sha256 h;
    std::vector<unsigned char> buf(1 << 20);
    size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), f)) > 0) h.update(buf.data(), n);
    std::fclose(f);
    return h.hex();
}

}  // namespace ipaint
