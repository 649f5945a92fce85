#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace cola {

/// Incremental SHA-256 (OpenSSL EVP); `hex()` finalizes.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t bytes);
    void update(std::string_view s) { update(s.data(), s.size()); }
    void update(std::span<const double> v) { update(v.data(), v.size_bytes()); }
    std::string hex();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace cola
