#include "qgs/timetag_io.hpp"

#include <array>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace qgs {

namespace {

void check_order(const TimeTagStream& tags, std::size_t i, std::uint64_t offset) {
    if (tags[i].channel >= kChannelCount) throw FormatError("unknown channel id " + std::to_string(tags[i].channel), offset);
    if (i > 0) {
        const auto& a = tags[i - 1];
        const auto& b = tags[i];
        if (b.time_ps < a.time_ps || (b.time_ps == a.time_ps && b.channel <= a.channel))
            throw FormatError("tags not sorted by (time, channel)", offset);
    }
}

std::ifstream open_in(const std::filesystem::path& p, std::ios::openmode mode = std::ios::in) {
    std::ifstream f(p, mode);
    if (!f) throw IoError("cannot open " + p.string());
    return f;
}

std::ofstream open_out(const std::filesystem::path& p, std::ios::openmode mode = std::ios::out) {
    std::ofstream f(p, mode | std::ios::trunc);
    if (!f) throw IoError("cannot write " + p.string());
    return f;
}

std::uint64_t parse_u64(const std::string& s, std::uint64_t line) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw FormatError("expected unsigned integer, got '" + s + "'", line);
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw FormatError("integer out of range: '" + s + "'", line);
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto n = s.find(sep, pos);
        out.push_back(s.substr(pos, n - pos));
        if (n == std::string::npos) break;
        pos = n + 1;
    }
    return out;
}

}  // namespace

void write_tags_binary(std::ostream& os, const TimeTagStream& tags) {
    std::array<unsigned char, kTagRecordBytes> rec{};
    for (const auto& t : tags) {
        rec.fill(0);
        for (int b = 0; b < 8; ++b) rec[static_cast<std::size_t>(b)] = static_cast<unsigned char>(t.time_ps >> (8 * b));
        rec[8] = t.channel;
        os.write(reinterpret_cast<const char*>(rec.data()), kTagRecordBytes);
    }
}

TimeTagStream read_tags_binary(std::istream& is) {
    TimeTagStream out;
    std::array<unsigned char, kTagRecordBytes> rec{};
    std::uint64_t offset = 0;
    while (true) {
        is.read(reinterpret_cast<char*>(rec.data()), kTagRecordBytes);
        const auto got = static_cast<std::size_t>(is.gcount());
        if (got == 0) break;
        if (got != kTagRecordBytes)
            throw FormatError("truncated tag record: " + std::to_string(got) + " of 16 bytes", offset);
        std::uint64_t t = 0;
        for (int b = 7; b >= 0; --b) t = (t << 8) | rec[static_cast<std::size_t>(b)];
        for (std::size_t b = 9; b < kTagRecordBytes; ++b)
            if (rec[b] != 0) throw FormatError("reserved bytes must be zero", offset + b);
        out.push_back({t, rec[8]});
        check_order(out, out.size() - 1, offset);
        offset += kTagRecordBytes;
    }
    return out;
}

void write_tags_csv(std::ostream& os, const TimeTagStream& tags) {
    os << "time_ps,channel\n";
    char buf[48];
    for (const auto& t : tags) {
        std::snprintf(buf, sizeof buf, "%" PRIu64 ",%u\n", t.time_ps, static_cast<unsigned>(t.channel));
        os << buf;
    }
}

TimeTagStream read_tags_csv(std::istream& is) {
    std::string line;
    std::uint64_t lineno = 1;
    if (!std::getline(is, line) || line != "time_ps,channel") throw FormatError("missing header 'time_ps,channel'", 1);
    TimeTagStream out;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 2) throw FormatError("expected two fields", lineno);
        const auto ch = parse_u64(f[1], lineno);
        if (ch >= kChannelCount) throw FormatError("unknown channel id", lineno);
        out.push_back({parse_u64(f[0], lineno), static_cast<std::uint8_t>(ch)});
        check_order(out, out.size() - 1, lineno);
    }
    return out;
}

void write_satellite_csv(std::ostream& os, const SatelliteRecord& rec) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "# window_first_slot=%" PRIu64 "\n# window_last_slot=%" PRIu64 "\n", rec.first_slot,
                  rec.last_slot);
    os << buf;
    std::snprintf(buf, sizeof buf, "# sent=%" PRIu64 ",%" PRIu64 ",%" PRIu64 "\n", rec.sent[0], rec.sent[1],
                  rec.sent[2]);
    os << buf;
    os << "pulse_index,basis,bit,intensity_id\n";
    for (const auto& e : rec.entries) {
        std::snprintf(buf, sizeof buf, "%" PRIu64 ",%u,%u,%u\n", e.pulse_index, static_cast<unsigned>(e.basis),
                      static_cast<unsigned>(e.bit), static_cast<unsigned>(e.intensity));
        os << buf;
    }
}

SatelliteRecord read_satellite_csv(std::istream& is) {
    SatelliteRecord rec;
    std::string line;
    std::uint64_t lineno = 0;
    bool have_first = false;
    bool have_last = false;
    bool have_sent = false;
    bool header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto body = line.substr(line.find_first_not_of("# "));
            const auto eq = body.find('=');
            if (eq == std::string::npos) continue;
            const auto key = body.substr(0, eq);
            const auto val = body.substr(eq + 1);
            if (key == "window_first_slot") {
                rec.first_slot = parse_u64(val, lineno);
                have_first = true;
            } else if (key == "window_last_slot") {
                rec.last_slot = parse_u64(val, lineno);
                have_last = true;
            } else if (key == "sent") {
                const auto f = split(val, ',');
                if (f.size() != kIntensities) throw FormatError("sent needs one count per intensity", lineno);
                for (std::size_t i = 0; i < kIntensities; ++i) rec.sent[i] = parse_u64(f[i], lineno);
                have_sent = true;
            }
            continue;
        }
        if (!header) {
            if (line != "pulse_index,basis,bit,intensity_id")
                throw FormatError("missing header 'pulse_index,basis,bit,intensity_id'", lineno);
            header = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 4) throw FormatError("expected four fields", lineno);
        SatelliteEntry e{parse_u64(f[0], lineno), 0, 0, 0};
        const auto basis = parse_u64(f[1], lineno);
        const auto bit = parse_u64(f[2], lineno);
        const auto inten = parse_u64(f[3], lineno);
        if (basis > 1 || bit > 1 || inten >= kIntensities) throw FormatError("field out of range", lineno);
        e.basis = static_cast<std::uint8_t>(basis);
        e.bit = static_cast<std::uint8_t>(bit);
        e.intensity = static_cast<std::uint8_t>(inten);
        if (!rec.entries.empty() && rec.entries.back().pulse_index >= e.pulse_index)
            throw FormatError("pulse_index not strictly increasing", lineno);
        rec.entries.push_back(e);
    }
    if (!header) throw FormatError("missing header 'pulse_index,basis,bit,intensity_id'", lineno);
    if (!have_first || !have_last || !have_sent)
        throw FormatError("missing window_first_slot / window_last_slot / sent metadata", lineno);
    if (rec.last_slot < rec.first_slot) throw FormatError("window_last_slot < window_first_slot", lineno);
    return rec;
}

TimeTagStream load_tags(const std::filesystem::path& path) {
    if (path.extension() == ".csv") {
        auto f = open_in(path);
        return read_tags_csv(f);
    }
    auto f = open_in(path, std::ios::in | std::ios::binary);
    return read_tags_binary(f);
}

void save_tags(const std::filesystem::path& path, const TimeTagStream& tags) {
    if (path.extension() == ".csv") {
        auto f = open_out(path);
        write_tags_csv(f, tags);
        if (!f) throw IoError("write failed: " + path.string());
        return;
    }
    auto f = open_out(path, std::ios::out | std::ios::binary);
    write_tags_binary(f, tags);
    if (!f) throw IoError("write failed: " + path.string());
}

SatelliteRecord load_satellite(const std::filesystem::path& path) {
    auto f = open_in(path);
    return read_satellite_csv(f);
}

void save_satellite(const std::filesystem::path& path, const SatelliteRecord& rec) {
    auto f = open_out(path);
    write_satellite_csv(f, rec);
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace qgs
