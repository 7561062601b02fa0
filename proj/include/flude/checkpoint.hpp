#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flude/round_engine.hpp"
#include "flude/scenario.hpp"

namespace flude {

// Run checkpoint: one JSON header line, then the little-endian float32
// parameter vectors (global model first, then each cache in listed order).

namespace ckptdetail {

inline void write_f32_le(std::ofstream& out, const std::vector<float>& v) {
    for (float f : v) {
        uint32_t u = std::bit_cast<uint32_t>(f);
        char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                     static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
        out.write(b, 4);
    }
}

inline void read_f32_le(std::ifstream& in, std::vector<float>& v, size_t n) {
    v.resize(n);
    for (size_t i = 0; i < n; ++i) {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in) throw std::runtime_error("checkpoint truncated");
        uint32_t u = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                     (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
        v[i] = std::bit_cast<float>(u);
    }
}

} // namespace ckptdetail

inline void save_checkpoint(const std::string& path, const Scenario& scenario,
                            const EngineState& st) {
    nlohmann::json h;
    h["magic"] = "flude-checkpoint-v1";
    h["scenario"] = scenario_to_json(scenario);
    h["rounds_done"] = st.rounds_done;
    h["clock_now"] = st.clock_now;
    h["epsilon"] = st.epsilon;
    h["prev_train_loss"] = st.prev_train_loss;
    h["cum_download"] = st.cum_download;
    h["cum_upload"] = st.cum_upload;
    h["freq"] = {{"round", st.freq.round},
                 {"cumulative_selected", st.freq.cumulative_selected},
                 {"population_size", st.freq.population_size}};
    h["dist"] = {{"w", st.dist.w},   {"h_old", st.dist.h_old}, {"n_old", st.dist.n_old},
                 {"lambda", st.dist.lambda}, {"mu", st.dist.mu}, {"w_min", st.dist.w_min},
                 {"w_max", st.dist.w_max}};
    nlohmann::json est = nlohmann::json::array();
    for (const auto& e : st.estimates) est.push_back({e.alpha, e.beta, e.participation});
    h["estimates"] = std::move(est);
    nlohmann::json explored = nlohmann::json::array();
    for (size_t i = 0; i < st.explored.size(); ++i)
        if (st.explored[i]) explored.push_back(static_cast<int>(i));
    h["explored"] = std::move(explored);
    h["global"] = {{"version", st.global.version},
                   {"shape", st.global.params.shape},
                   {"dim", st.global.params.dim()}};
    nlohmann::json caches = nlohmann::json::array();
    for (const auto& [id, c] : st.caches)
        caches.push_back({{"device", id},
                          {"processed", c.processed_samples},
                          {"total", c.total_samples},
                          {"learning_rate", c.learning_rate},
                          {"cached_round", c.cached_round},
                          {"pass_round", c.pass_round},
                          {"cached_clock", c.cached_clock},
                          {"shape", c.params.shape},
                          {"dim", c.params.dim()}});
    h["caches"] = std::move(caches);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write checkpoint: " + tmp);
        out << h.dump() << "\n";
        ckptdetail::write_f32_le(out, st.global.params.values);
        for (const auto& [id, c] : st.caches) ckptdetail::write_f32_le(out, c.params.values);
        if (!out) throw std::runtime_error("checkpoint write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

struct LoadedCheckpoint {
    Scenario scenario;
    EngineState state;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("checkpoint missing header");
    nlohmann::json h = nlohmann::json::parse(header);
    if (h.value("magic", "") != std::string("flude-checkpoint-v1"))
        throw std::runtime_error("not a flude checkpoint: " + path);

    LoadedCheckpoint lc;
    ScenarioValidation v = parse_scenario(h.at("scenario"));
    if (!v.ok()) throw std::runtime_error("checkpoint scenario invalid: " + v.errors.front());
    lc.scenario = v.scenario;

    EngineState& st = lc.state;
    st.rounds_done = h.at("rounds_done").get<int64_t>();
    st.clock_now = h.at("clock_now").get<double>();
    st.epsilon = h.at("epsilon").get<double>();
    st.prev_train_loss = h.at("prev_train_loss").get<double>();
    st.cum_download = h.at("cum_download").get<int64_t>();
    st.cum_upload = h.at("cum_upload").get<int64_t>();
    st.freq.round = h.at("freq").at("round").get<int64_t>();
    st.freq.cumulative_selected = h.at("freq").at("cumulative_selected").get<int64_t>();
    st.freq.population_size = h.at("freq").at("population_size").get<int64_t>();
    st.dist.w = h.at("dist").at("w").get<double>();
    st.dist.h_old = h.at("dist").at("h_old").get<double>();
    st.dist.n_old = h.at("dist").at("n_old").get<double>();
    st.dist.lambda = h.at("dist").at("lambda").get<double>();
    st.dist.mu = h.at("dist").at("mu").get<double>();
    st.dist.w_min = h.at("dist").at("w_min").get<double>();
    st.dist.w_max = h.at("dist").at("w_max").get<double>();
    for (const auto& e : h.at("estimates"))
        st.estimates.push_back({e.at(0).get<double>(), e.at(1).get<double>(),
                                e.at(2).get<int64_t>()});
    st.explored.assign(st.estimates.size(), 0);
    for (const auto& id : h.at("explored"))
        st.explored.at(id.get<size_t>()) = 1;

    st.global.version = h.at("global").at("version").get<int64_t>();
    st.global.params.shape = h.at("global").at("shape").get<std::vector<int>>();
    size_t global_dim = h.at("global").at("dim").get<size_t>();

    struct CacheMeta {
        int device;
        CacheEntry entry;
        size_t dim;
    };
    std::vector<CacheMeta> cache_meta;
    for (const auto& c : h.at("caches")) {
        CacheMeta m;
        m.device = c.at("device").get<int>();
        m.entry.processed_samples = c.at("processed").get<int>();
        m.entry.total_samples = c.at("total").get<int>();
        m.entry.learning_rate = c.at("learning_rate").get<double>();
        m.entry.cached_round = c.at("cached_round").get<int64_t>();
        m.entry.pass_round = c.at("pass_round").get<int64_t>();
        m.entry.cached_clock = c.at("cached_clock").get<double>();
        m.entry.params.shape = c.at("shape").get<std::vector<int>>();
        m.dim = c.at("dim").get<size_t>();
        cache_meta.push_back(std::move(m));
    }

    ckptdetail::read_f32_le(in, st.global.params.values, global_dim);
    for (auto& m : cache_meta) {
        ckptdetail::read_f32_le(in, m.entry.params.values, m.dim);
        st.caches.emplace_back(m.device, std::move(m.entry));
    }
    return lc;
}

} // namespace flude
