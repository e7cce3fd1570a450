#include "ipaint/core/container.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ipaint/core/sha256.hpp"

namespace ipaint::io {

using json = nlohmann::json;

namespace {
constexpr char kMagic[9] = "IPNTNAC1";

template <typename T>
const char* dtype_name();
template <>
const char* dtype_name<float>() { return "f32"; }
template <>
const char* dtype_name<double>() { return "f64"; }
}  // namespace

template <typename T>
void Container::put(const std::string& name, const Tensor<T>& t) {
    Entry e;
    e.dtype = dtype_name<T>();
    e.shape = t.shape();
    e.bytes.resize(static_cast<size_t>(t.numel()) * sizeof(T));
    std::memcpy(e.bytes.data(), t.data(), e.bytes.size());
    if (!entries_.count(name)) order_.push_back(name);
    entries_[name] = std::move(e);
}

template <typename T>
Tensor<T> Container::get(const std::string& name) const {
    const Entry& e = entry(name);
    Tensor<T> t(e.shape);
    if (e.dtype == dtype_name<T>()) {
        std::memcpy(t.data(), e.bytes.data(), e.bytes.size());
    } else if (e.dtype == "f32") {
        // widening f32 -> f64 is exact
        const float* src = reinterpret_cast<const float*>(e.bytes.data());
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(src[i]);
    } else {
        throw DataError("container: array '" + name + "' is " + e.dtype +
                        ", refusing narrowing load");
    }
    return t;
}

bool Container::has(const std::string& name) const { return entries_.count(name) > 0; }

const Container::Entry& Container::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DataError("container: missing array '" + name + "'");
    return it->second;
}

void Container::save(const std::string& path) const {
    json arrays = json::array();
    int64_t offset = 0;
    for (const auto& name : order_) {
        const Entry& e = entries_.at(name);
        arrays.push_back({{"name", name},
                          {"dtype", e.dtype},
                          {"shape", e.shape},
                          {"offset", offset},
                          {"nbytes", e.bytes.size()}});
        offset += static_cast<int64_t>(e.bytes.size());
    }
    json header = {{"arrays", arrays}, {"meta", json::parse(meta_json_)}};
    const std::string hdr = header.dump();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("container: cannot write " + path);
    Sha256 sha;
    f.write(kMagic, 8);
    const uint64_t hlen = hdr.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    sha.update(hdr.data(), hdr.size());
    for (const auto& name : order_) {
        const Entry& e = entries_.at(name);
        f.write(reinterpret_cast<const char*>(e.bytes.data()),
                static_cast<std::streamsize>(e.bytes.size()));
        sha.update(e.bytes.data(), e.bytes.size());
    }
    auto digest = sha.digest();
    f.write(reinterpret_cast<const char*>(digest.data()), 32);
    if (!f) throw DataError("container: write failed for " + path);
}

Container Container::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("container: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("container: " + path + " is not a named-array container");
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hdr(hlen, '\0');
    f.read(hdr.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw DataError("container: truncated header in " + path);

    json header = json::parse(hdr, nullptr, false);
    if (header.is_discarded()) throw DataError("container: corrupt header in " + path);

    Sha256 sha;
    sha.update(hdr.data(), hdr.size());

    Container c;
    c.meta_json_ = header.at("meta").dump();
    for (const auto& a : header.at("arrays")) {
        Entry e;
        e.dtype = a.at("dtype").get<std::string>();
        e.shape = a.at("shape").get<std::vector<int64_t>>();
        const size_t nbytes = a.at("nbytes").get<size_t>();
        e.bytes.resize(nbytes);
        f.read(reinterpret_cast<char*>(e.bytes.data()), static_cast<std::streamsize>(nbytes));
        if (!f) throw DataError("container: truncated payload in " + path);
        sha.update(e.bytes.data(), e.bytes.size());
        const std::string name = a.at("name").get<std::string>();
        c.order_.push_back(name);
        c.entries_[name] = std::move(e);
    }
    unsigned char stored[32];
    f.read(reinterpret_cast<char*>(stored), 32);
    if (!f) throw DataError("container: missing checksum in " + path);
    auto digest = sha.digest();
    if (std::memcmp(stored, digest.data(), 32) != 0)
        throw DataError("container: checksum mismatch in " + path + " (file is corrupt)");
    return c;
}

std::string Container::payload_sha256() const {
    Sha256 sha;
    for (const auto& name : order_) {
        const Entry& e = entries_.at(name);
        sha.update(e.bytes.data(), e.bytes.size());
    }
    return sha.hex();
}

template void Container::put<float>(const std::string&, const Tensor<float>&);
template void Container::put<double>(const std::string&, const Tensor<double>&);
template Tensor<float> Container::get<float>(const std::string&) const;
template Tensor<double> Container::get<double>(const std::string&) const;

}  // namespace ipaint::io
