#include "microtrap/cli/manifest.hpp"

#include "microtrap/errors.hpp"

#include <boost/uuid/detail/sha1.hpp>
#include <fmt/format.h>
#include <fstream>
#include <iterator>

namespace microtrap::cli
{
std::string file_hash(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError(fmt::format("cannot read '{}'", path.string()));
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    boost::uuids::detail::sha1 sha;
    sha.process_bytes(bytes.data(), bytes.size());
    boost::uuids::detail::sha1::digest_type digest;
    sha.get_digest(digest);
    std::string hex;
    for (unsigned word : digest)
        hex += fmt::format("{:08x}", word);
    return hex;
}

void RunManifest::add_config(const std::filesystem::path& path)
{
    config_hashes[path.string()] = file_hash(path);
}

nlohmann::json manifest_to_json(const RunManifest& m)
{
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& o : m.outputs)
        outputs.push_back({{"file", o.name}, {"sha1", o.hash}});
    return {{"command", m.command},
            {"arguments", m.arguments},
            {"config_hashes", m.config_hashes},
            {"seed", m.seed},
            {"threads", m.threads},
            {"version", m.version},
            {"wall_time_s", m.wall_time},
            {"outputs", outputs},
            {"metadata", m.metadata}};
}

} // namespace microtrap::cli
