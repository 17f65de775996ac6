#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vibro/finger_model.hpp"
#include "vibro/sim.hpp"

namespace vibro {

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// All numeric output goes through one deterministic format so identical
/// data always serializes to identical bytes.
inline void append_number(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    out += buf;
}

/// Write-temp-then-rename: a failed run never leaves a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw CsvError("cannot open for writing: " + tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw CsvError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace detail

inline constexpr const char* kTraceHeader = "t,x1,x2,hall1,hall2,i1,i2,a_cmd,ph_cmd,f_finger,W_true,P_true";

inline std::string trace_to_csv(const SimTrace& tr) {
    std::string out;
    out.reserve(tr.size() * 160 + 64);
    out += kTraceHeader;
    out += '\n';
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double* cols[] = {&tr.t[i],     &tr.x1[i],    &tr.x2[i],     &tr.hall1[i],
                                &tr.hall2[i], &tr.i1[i],    &tr.i2[i],     &tr.a_cmd[i],
                                &tr.ph_cmd[i], &tr.f_finger[i], &tr.w_true[i], &tr.p_true[i]};
        for (std::size_t c = 0; c < 12; ++c) {
            if (c) out += ',';
            detail::append_number(out, *cols[c]);
        }
        out += '\n';
    }
    return out;
}

inline void write_trace_csv(const SimTrace& tr, const std::filesystem::path& path) {
    detail::atomic_write(path, trace_to_csv(tr));
}

inline SimTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw CsvError("cannot open trace: " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw CsvError("empty trace file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTraceHeader)
        throw CsvError("bad trace header, expected '" + std::string(kTraceHeader) + "'");

    SimTrace tr;
    std::size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 12)
            throw CsvError("trace row " + std::to_string(row) + ": expected 12 columns");
        double v[12];
        for (std::size_t c = 0; c < 12; ++c) {
            try {
                std::size_t used = 0;
                v[c] = std::stod(cells[c], &used);
                if (used != cells[c].size()) throw std::invalid_argument("trailing chars");
            } catch (const std::exception&) {
                throw CsvError("trace row " + std::to_string(row) + ": bad number '" + cells[c] + "'");
            }
        }
        tr.t.push_back(v[0]);
        tr.x1.push_back(v[1]);
        tr.x2.push_back(v[2]);
        tr.hall1.push_back(v[3]);
        tr.hall2.push_back(v[4]);
        tr.i1.push_back(v[5]);
        tr.i2.push_back(v[6]);
        tr.a_cmd.push_back(v[7]);
        tr.ph_cmd.push_back(v[8]);
        tr.f_finger.push_back(v[9]);
        tr.w_true.push_back(v[10]);
        tr.p_true.push_back(v[11]);
    }
    if (tr.size() >= 2) {
        const double dt = tr.t[1] - tr.t[0];
        if (!(dt > 0.0)) throw CsvError("trace time column not increasing");
        for (std::size_t i = 2; i < tr.size(); ++i)
            if (std::abs((tr.t[i] - tr.t[i - 1]) - dt) > 1e-9)
                throw CsvError("trace sample spacing not constant at row " + std::to_string(i + 1));
        tr.rate_hz = 1.0 / dt;
    }
    return tr;
}

/// Intensity-match records, schema: f_hz,v,F_a,F_r,W,subject_id
inline constexpr const char* kMatchHeader = "f_hz,v,F_a,F_r,W,subject_id";

inline void write_match_records_csv(const std::vector<MatchRecord>& records,
                                    const std::filesystem::path& path) {
    std::string out = kMatchHeader;
    out += '\n';
    for (const auto& r : records) {
        detail::append_number(out, r.f_hz);
        out += ',';
        detail::append_number(out, r.v);
        out += ',';
        detail::append_number(out, r.f_a);
        out += ',';
        detail::append_number(out, r.f_r);
        out += ',';
        detail::append_number(out, r.w);
        out += ',';
        out += r.subject_id;
        out += '\n';
    }
    detail::atomic_write(path, out);
}

inline std::vector<MatchRecord> read_match_records_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw CsvError("cannot open match records: " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw CsvError("empty match record file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMatchHeader)
        throw CsvError("bad match-record header, expected '" + std::string(kMatchHeader) + "'");
    std::vector<MatchRecord> out;
    std::size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 6)
            throw CsvError("match record row " + std::to_string(row) + ": expected 6 columns");
        MatchRecord r;
        try {
            r.f_hz = std::stod(cells[0]);
            r.v = std::stod(cells[1]);
            r.f_a = std::stod(cells[2]);
            r.f_r = std::stod(cells[3]);
            r.w = std::stod(cells[4]);
        } catch (const std::exception&) {
            throw CsvError("match record row " + std::to_string(row) + ": bad number");
        }
        r.subject_id = cells[5];
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace vibro
