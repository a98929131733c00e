// Copyright 2026 The heraldsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HERALDSIM_RECORDS_HPP
#define HERALDSIM_RECORDS_HPP

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "heraldsim/error.hpp"
#include "heraldsim/mcsim.hpp"
#include "heraldsim/protocol.hpp"

namespace heraldsim {

inline nlohmann::json to_json(const DetectorConfig &d) {
    return {{"bins", d.bins}, {"efficiency", d.efficiency}};
}

inline DetectorConfig detector_from_json(const nlohmann::json &j) {
    DetectorConfig d{j.at("bins").get<int>(), j.at("efficiency").get<double>()};
    d.validate();
    return d;
}

inline nlohmann::json to_json(const LoopConfig &cfg) {
    nlohmann::json zetas = nlohmann::json::array();
    nlohmann::json gammas = nlohmann::json::array();
    for (const auto &sq : cfg.squeeze) {
        zetas.push_back(sq.zeta);
        gammas.push_back(sq.gamma);
    }
    return {{"zeta", zetas},
            {"gamma", gammas},
            {"herald", to_json(cfg.herald)},
            {"signal", to_json(cfg.signal)},
            {"loop_eff", cfg.loop_eff}};
}

inline LoopConfig loop_config_from_json(const nlohmann::json &j) {
    LoopConfig cfg;
    cfg.squeeze.clear();
    for (const auto &z : j.at("zeta")) {
        cfg.squeeze.push_back(gain_from_zeta(z.get<double>()));
    }
    require(!cfg.squeeze.empty(), "configuration has no squeezing parameter");
    cfg.herald = detector_from_json(j.at("herald"));
    cfg.signal = detector_from_json(j.at("signal"));
    cfg.loop_eff = j.at("loop_eff").get<std::vector<double>>();
    return cfg;
}

/// Contents of a record file: the `#`-prefixed JSON preamble and the records in shot order.
struct RecordFile {
    nlohmann::json preamble;
    LoopConfig config;
    std::uint64_t seed = 0;
    RecordTable records;
};

inline std::string record_header(int passes) {
    std::string h;
    for (int j = 1; j <= passes; ++j) {
        h += "pass" + std::to_string(j) + ",";
    }
    return h + "signal";
}

/// Streaming CSV writer: preamble line, header line, then one line per record.
class RecordWriter {
   public:
    RecordWriter(std::ostream &out, const nlohmann::json &preamble, int passes) : out_(out), passes_(passes) {
        out_ << "# " << preamble.dump() << "\n" << record_header(passes) << "\n";
    }

    void write(const RecordTable &block) {
        require(block.passes() == passes_, "record block has the wrong pass count");
        buffer_.clear();
        char tmp[8];
        for (std::size_t i = 0; i < block.size(); ++i) {
            ClickRecord r = block[i];
            for (int j = 0; j < passes_; ++j) {
                auto res = std::to_chars(tmp, tmp + sizeof(tmp), r.herald[static_cast<std::size_t>(j)]);
                buffer_.append(tmp, res.ptr);
                buffer_.push_back(',');
            }
            auto res = std::to_chars(tmp, tmp + sizeof(tmp), r.signal);
            buffer_.append(tmp, res.ptr);
            buffer_.push_back('\n');
        }
        out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
        if (!out_) {
            fail(ErrorKind::io, "failed writing records");
        }
    }

   private:
    std::ostream &out_;
    int passes_;
    std::string buffer_;
};

inline nlohmann::json simulation_preamble(const LoopConfig &cfg, int passes, std::uint64_t shots, std::uint64_t seed) {
    return {{"kind", "records"}, {"config", to_json(cfg)}, {"passes", passes}, {"shots", shots}, {"seed", seed}};
}

/// Samples and writes a complete record file; the bytes depend only on (cfg, passes, shots, seed).
inline void write_simulation(std::ostream &out, const LoopConfig &cfg, int passes, std::uint64_t shots,
                             std::uint64_t seed, int threads = 1) {
    validate_sampling(cfg, passes, shots);
    RecordWriter writer(out, simulation_preamble(cfg, passes, shots, seed), passes);
    sample_records(cfg, passes, shots, seed, threads, [&](const RecordTable &block, std::uint64_t) {
        writer.write(block);
    });
    out.flush();
    if (!out) {
        fail(ErrorKind::io, "failed writing records");
    }
}

inline RecordFile read_records(std::istream &in) {
    RecordFile file;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        fail(ErrorKind::io, "record file must start with a '# {json}' preamble line");
    }
    try {
        file.preamble = nlohmann::json::parse(line.substr(2));
        file.config = loop_config_from_json(file.preamble.at("config"));
        file.seed = file.preamble.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception &e) {
        fail(ErrorKind::io, std::string("unreadable preamble: ") + e.what());
    }
    if (!std::getline(in, line)) {
        fail(ErrorKind::io, "record file has no header line");
    }
    int passes = 0;
    for (std::size_t pos = 0; (pos = line.find("pass", pos)) != std::string::npos; pos += 4) {
        ++passes;
    }
    if (passes < 1 || line != record_header(passes)) {
        fail(ErrorKind::io, "unexpected record header '" + line + "'");
    }
    file.records = RecordTable(passes);
    if (file.preamble.contains("shots")) {
        file.records.reserve(file.preamble["shots"].get<std::uint64_t>());
    }
    ClickRecord r;
    r.passes = passes;
    std::uint64_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const char *p = line.data();
        const char *end = p + line.size();
        for (int j = 0; j <= passes; ++j) {
            unsigned value = 0;
            auto res = std::from_chars(p, end, value);
            bool last = j == passes;
            if (res.ec != std::errc() || value > 255 || (last ? res.ptr != end : (res.ptr == end || *res.ptr != ','))) {
                fail(ErrorKind::io, "malformed record on line " + std::to_string(line_no));
            }
            if (last) {
                r.signal = static_cast<std::uint8_t>(value);
            } else {
                r.herald[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(value);
            }
            p = res.ptr + (last ? 0 : 1);
        }
        file.records.push_back(r);
    }
    return file;
}

inline RecordFile read_records(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::io, "cannot open " + path);
    }
    return read_records(in);
}

}  // namespace heraldsim

#endif
