#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ipaint/core/error.hpp"
#include "ipaint/core/tensor.hpp"

namespace ipaint::io {

// Portable named-array container. Layout:
//   magic "IPNTNAC1" | u64 LE header length | header JSON | payload | 32-byte
//   sha256(header JSON + payload).
// Array order in the file follows insertion order, so save -> load -> save
// round-trips bit-identically. dtype is "f32" or "f64", payload little-endian.
class Container {
public:
    struct Entry {
        std::string dtype;
        std::vector<int64_t> shape;
        std::vector<unsigned char> bytes;
    };

    template <typename T>
    void put(const std::string& name, const Tensor<T>& t);

    template <typename T>
    Tensor<T> get(const std::string& name) const;

    bool has(const std::string& name) const;
    const Entry& entry(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }

    // Free-form metadata JSON (string form, embedded into the header).
    void set_meta(const std::string& json) { meta_json_ = json; }
    const std::string& meta() const { return meta_json_; }

    void save(const std::string& path) const;
    static Container load(const std::string& path);

    // Digest of all payload bytes in file order; stable identity for a
    // weight set regardless of where the file lives.
    std::string payload_sha256() const;

private:
    std::vector<std::string> order_;
    std::map<std::string, Entry> entries_;
    std::string meta_json_ = "{}";
};

}  // namespace ipaint::io
