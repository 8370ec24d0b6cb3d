#include "hevems/cycle.hpp"

#include "hevems/error.hpp"
#include "hevems/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace hevems {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        fields.push_back(trim(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
        if (comma == std::string_view::npos) {
            break;
        }
        pos = comma + 1;
    }
    return fields;
}

bool parse_number(std::string_view field, double &out) {
    if (!field.empty() && field.front() == '+') {
        field.remove_prefix(1);
    }
    const auto *end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

} // namespace

void validate(const DriveCycle &cycle) {
    if (!(cycle.dt > 0.0) || !std::isfinite(cycle.dt)) {
        throw ValidationError("cycle '" + cycle.name + "': dt must be positive");
    }
    if (cycle.speeds.size() < 2) {
        throw ValidationError("cycle '" + cycle.name + "': needs at least 2 samples");
    }
    for (std::size_t i = 0; i < cycle.speeds.size(); ++i) {
        const double v = cycle.speeds[i];
        if (!std::isfinite(v)) {
            throw ValidationError("cycle '" + cycle.name + "': non-finite speed at sample " +
                                  std::to_string(i));
        }
        if (v < 0.0) {
            throw ValidationError("cycle '" + cycle.name + "': negative speed at sample " +
                                  std::to_string(i));
        }
    }
}

DriveCycle make_cycle(std::string name, double dt, std::vector<double> speeds) {
    DriveCycle cycle{std::move(name), dt, std::move(speeds)};
    validate(cycle);
    return cycle;
}

DriveCycle parse_cycle_csv(std::string_view text, double dt, bool kmh, std::string name) {
    if (!(dt > 0.0)) {
        throw ValidationError("dt must be positive");
    }
    std::vector<double> times;
    std::vector<double> speeds;
    std::size_t columns = 0;
    std::size_t row = 0;
    bool first_content = true;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        const auto line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++row;
        if (line.empty()) {
            continue;
        }
        const auto fields = split_fields(line);
        std::vector<double> values(fields.size());
        bool numeric = true;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            numeric = numeric && parse_number(fields[i], values[i]);
        }
        if (first_content) {
            first_content = false;
            columns = fields.size();
            if (columns < 1 || columns > 2) {
                throw ValidationError("row " + std::to_string(row) +
                                      ": expected columns `v` or `t,v`");
            }
            if (!numeric) {
                continue; // header
            }
        }
        if (fields.size() != columns) {
            throw ValidationError("row " + std::to_string(row) + ": expected " +
                                  std::to_string(columns) + " column(s)");
        }
        if (!numeric) {
            throw ValidationError("row " + std::to_string(row) + ": not a number");
        }
        double v = values.back();
        if (!std::isfinite(v)) {
            throw ValidationError("row " + std::to_string(row) + ": non-finite speed");
        }
        if (v < 0.0) {
            throw ValidationError("negative speed at row " + std::to_string(row));
        }
        if (kmh) {
            v /= 3.6;
        }
        if (columns == 2) {
            if (!times.empty()) {
                const double step = values[0] - times.back();
                if (std::abs(step - dt) > 1e-9 * std::max(1.0, dt)) {
                    throw ValidationError("non-uniform sampling at row " + std::to_string(row));
                }
            }
            times.push_back(values[0]);
        }
        speeds.push_back(v);
    }
    if (speeds.empty()) {
        throw ValidationError("empty cycle file");
    }
    return make_cycle(std::move(name), dt, std::move(speeds));
}

DriveCycle load_cycle(const std::filesystem::path &path, double dt, bool kmh) {
    if (!std::filesystem::exists(path)) {
        throw ValidationError("cycle file not found: " + path.string());
    }
    return parse_cycle_csv(io::read_file(path), dt, kmh, path.stem().string());
}

std::string format_cycle_csv(const DriveCycle &cycle) {
    std::string out = "t,v\n";
    for (std::size_t i = 0; i < cycle.speeds.size(); ++i) {
        out += io::format_double(static_cast<double>(i) * cycle.dt);
        out += ',';
        out += io::format_double(cycle.speeds[i]);
        out += '\n';
    }
    return out;
}

void write_cycle(const std::filesystem::path &path, const DriveCycle &cycle) {
    io::write_file_atomic(path, format_cycle_csv(cycle));
}

DriveCycle window(const DriveCycle &cycle, std::size_t start, std::size_t length) {
    if (length < 2 || start > cycle.size() || length > cycle.size() - start) {
        throw ValidationError("window [" + std::to_string(start) + ", +" + std::to_string(length) +
                              ") out of range for cycle of " + std::to_string(cycle.size()) +
                              " samples");
    }
    const auto first = cycle.speeds.begin() + static_cast<std::ptrdiff_t>(start);
    return DriveCycle{cycle.name, cycle.dt,
                      std::vector<double>(first, first + static_cast<std::ptrdiff_t>(length))};
}

CycleStats cycle_stats(const DriveCycle &cycle) {
    CycleStats stats;
    const auto &v = cycle.speeds;
    stats.duration = cycle.duration();
    stats.mean_speed = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    stats.max_speed = *std::max_element(v.begin(), v.end());
    double accel = 0.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        accel += std::abs(v[i + 1] - v[i]) / cycle.dt;
    }
    stats.mean_abs_accel = accel / static_cast<double>(v.size() - 1);
    return stats;
}

DriveCycle resample(const DriveCycle &cycle, double new_dt) {
    validate(cycle);
    if (!(new_dt > 0.0)) {
        throw ValidationError("resample: dt must be positive");
    }
    const double duration = cycle.duration();
    const auto count = static_cast<std::size_t>(std::floor(duration / new_dt + 1e-9)) + 1;
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double pos = static_cast<double>(k) * new_dt / cycle.dt;
        const auto i = std::min(static_cast<std::size_t>(pos), cycle.size() - 2);
        const double w = std::clamp(pos - static_cast<double>(i), 0.0, 1.0);
        out[k] = cycle.speeds[i] + w * (cycle.speeds[i + 1] - cycle.speeds[i]);
    }
    return make_cycle(cycle.name, new_dt, std::move(out));
}

std::vector<std::string> standard_cycle_names() { return {"nedc", "ftp75", "wltc_jp"}; }

DriveCycle standard_cycle(std::string_view name) {
    const auto names = standard_cycle_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw ValidationError("unknown standard cycle: " + std::string(name));
    }
    const auto path = std::filesystem::path(HEVEMS_DATA_DIR) / "cycles" / (std::string(name) + ".csv");
    return load_cycle(path, 1.0, false);
}

} // namespace hevems
