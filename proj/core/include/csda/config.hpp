#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace csda {

// Plain-text key=value configuration. Every key the toolkit understands is
// declared in the schema with a default and a one-line description; parsing
// a file with an unknown key fails naming that key.
class Config {
public:
    Config();  // all defaults

    static Config from_file(const std::filesystem::path& path);
    // Applies "key=value" overrides on top of the current state.
    void set(const std::string& key, const std::string& value);

    const std::string& str(const std::string& key) const;
    double real(const std::string& key) const;
    int integer(const std::string& key) const;
    bool flag(const std::string& key) const;

    // FNV-1a over the sorted canonical "key=value" lines.
    std::uint64_t hash() const;
    std::string canonical_text() const;

    struct KeyDoc {
        std::string key;
        std::string def;
        std::string doc;
    };
    static const std::vector<KeyDoc>& schema();

private:
    std::map<std::string, std::string> values_;
};

}  // namespace csda
