#include "diffusion/trace_io.hpp"

#include "core/error.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

namespace marscache::diffusion {

namespace {

using nlohmann::json;

constexpr int kTraceVersion = 1;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json flags(const std::vector<bool> & v) {
    json out = json::array();
    for (bool b : v) {
        out.push_back(b ? 1 : 0);
    }
    return out;
}

std::vector<bool> read_flags(const json & j) {
    std::vector<bool> out;
    for (const auto & x : j) {
        out.push_back(x.get<int>() != 0);
    }
    return out;
}

}  // namespace

void write_trace(const DecodeTrace & trace, std::ostream & out) {
    json header = {
        {"schema",  "marscache.trace"},
        {"version", kTraceVersion    },
        {"engine",  trace.engine     },
        {"clock",   trace.clock      },
        {"groups",  trace.groups     },
    };
    out << header.dump() << '\n';
    for (const StepRecord & r : trace.steps) {
        json committed = json::array();
        for (const Commit & c : r.committed) {
            committed.push_back({c.position, c.token});
        }
        json rec = {
            {"step",            r.step                          },
            {"block",           r.block                         },
            {"block_step",      r.block_step                    },
            {"committed",       committed                       },
            {"refresh_text",    flags(r.report.refresh_text)    },
            {"refresh_visual",  flags(r.report.refresh_visual)  },
            {"full_recompute",  r.report.full_recompute         },
            {"score_entries",   r.report.score_entries          },
            {"rows_recomputed", r.report.rows_recomputed        },
            {"anchor_digest",   hex64(r.report.anchor_digest)   },
            {"elapsed_ns",      r.elapsed_ns                    },
        };
        out << rec.dump() << '\n';
    }
}

DecodeTrace read_trace(std::istream & in) {
    DecodeTrace trace;
    std::string line;
    std::size_t line_no = 0;
    try {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) {
                continue;
            }
            const json j = json::parse(line);
            if (line_no == 1) {
                if (j.value("schema", "") != "marscache.trace" || j.value("version", 0) != kTraceVersion) {
                    fail(ErrorKind::io, "trace header: unsupported schema or version");
                }
                trace.engine = j.at("engine").get<std::string>();
                trace.clock  = j.at("clock").get<std::string>();
                trace.groups = j.at("groups").get<std::size_t>();
                continue;
            }
            StepRecord r;
            r.step       = j.at("step").get<std::size_t>();
            r.block      = j.at("block").get<std::size_t>();
            r.block_step = j.at("block_step").get<std::size_t>();
            for (const auto & c : j.at("committed")) {
                r.committed.push_back({c.at(0).get<std::size_t>(), c.at(1).get<TokenId>(), 0.0});
            }
            r.report.refresh_text    = read_flags(j.at("refresh_text"));
            r.report.refresh_visual  = read_flags(j.at("refresh_visual"));
            r.report.full_recompute  = j.at("full_recompute").get<bool>();
            r.report.score_entries   = j.at("score_entries").get<std::size_t>();
            r.report.rows_recomputed = j.at("rows_recomputed").get<std::size_t>();
            r.report.anchor_digest   = std::stoull(j.at("anchor_digest").get<std::string>(), nullptr, 16);
            r.elapsed_ns             = j.at("elapsed_ns").get<std::uint64_t>();
            trace.steps.push_back(std::move(r));
        }
    } catch (const json::exception & e) {
        fail(ErrorKind::io, "trace line " + std::to_string(line_no) + ": " + e.what());
    }
    if (line_no == 0) {
        fail(ErrorKind::io, "trace is empty");
    }
    return trace;
}

}  // namespace marscache::diffusion
