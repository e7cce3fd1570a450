#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ipaint {

// Incremental SHA-256 (OpenSSL EVP underneath).
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, size_t n);
    // Finalizes; the object must not be updated afterwards.
    std::string hex();
    std::vector<unsigned char> digest();

private:
    void* ctx_;
    std::vector<unsigned char> out_;
    bool done_ = false;
    void finalize();
};

std::string sha256_hex(const void* data, size_t n);
std::string sha256_hex_of_file(const std::string& path);

}  // namespace ipaint
