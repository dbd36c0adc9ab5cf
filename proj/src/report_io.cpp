#include "msvg/dataio.hpp"
#include "msvg/error.hpp"
#include "msvg/selection.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace msvg {

namespace {

std::string number(double v) {
    return std::isfinite(v) ? format_double(v) : std::string("NA");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep)) {
        out.push_back(item);
    }
    return out;
}

} // namespace

std::string format_report(const DetectionReport& report) {
    std::ostringstream out;
    std::string samples;
    for (std::size_t m = 0; m < report.sample_ids.size(); ++m) {
        samples += (m ? "," : "") + report.sample_ids[m];
    }
    out << "# degree=" << report.degree << "\tgamma2=" << number(report.gamma2) << "\tbfdr_level="
        << number(report.bfdr_level) << "\tu0=" << number(report.threshold_u0) << "\tsamples=" << samples << '\n';

    std::size_t M = report.sample_ids.size();
    for (const auto& d : report.decisions) {
        M = std::max(M, d.incl.size());
    }
    out << "gene_id\te_u1\te_u2\tu_tilde\tselected";
    for (std::size_t m = 0; m < M; ++m) {
        out << "\talpha_m" << m + 1 << "_k1\talpha_m" << m + 1 << "_k2";
    }
    out << "\titerations\tconverged\tfinal_elbo\n";
    for (const auto& d : report.decisions) {
        out << d.gene_id << '\t' << number(d.e_u1) << '\t' << number(d.e_u2) << '\t' << number(d.u_tilde) << '\t'
            << (d.selected ? 1 : 0);
        for (std::size_t m = 0; m < M; ++m) {
            if (m < d.incl.size()) {
                out << '\t' << number(d.incl[m][0]) << '\t' << number(d.incl[m][1]);
            } else {
                out << "\tNA\tNA";
            }
        }
        out << '\t' << d.iterations << '\t' << (d.converged ? 1 : 0) << '\t' << number(d.final_elbo) << '\n';
    }
    return out.str();
}

void write_report(const DetectionReport& report, const std::string& path) {
    const std::string text = format_report(report);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write report: " + path);
    }
    out << text;
    if (!out) {
        throw IoError("failed writing report: " + path);
    }
}

DetectionReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open report: " + path);
    }
    DetectionReport report;
    std::string line;
    std::vector<std::string> columns;
    auto value = [&](const std::string& text) {
        return text == "NA" ? std::nan("") : parse_double(text, path);
    };
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            for (const auto& field : split_tabs(line.substr(line.find_first_not_of("# ")))) {
                const auto eq = field.find('=');
                if (eq == std::string::npos) {
                    continue;
                }
                const std::string key = field.substr(0, eq);
                const std::string val = field.substr(eq + 1);
                if (key == "degree") {
                    report.degree = static_cast<int>(parse_double(val, path));
                } else if (key == "gamma2") {
                    report.gamma2 = value(val);
                } else if (key == "bfdr_level") {
                    report.bfdr_level = value(val);
                } else if (key == "u0") {
                    report.threshold_u0 = value(val);
                } else if (key == "samples") {
                    report.sample_ids = split(val, ',');
                }
            }
            continue;
        }
        const auto fields = split_tabs(line);
        if (columns.empty()) {
            columns = fields;
            if (columns.size() < 8 || columns[0] != "gene_id") {
                throw DataError(path + ": not a detection report");
            }
            continue;
        }
        if (fields.size() != columns.size()) {
            throw DataError(path + ": row has wrong number of fields");
        }
        GeneDecision d;
        d.gene_id = fields[0];
        d.e_u1 = value(fields[1]);
        d.e_u2 = value(fields[2]);
        d.u_tilde = value(fields[3]);
        d.selected = fields[4] == "1";
        const std::size_t M = (columns.size() - 8) / 2;
        for (std::size_t m = 0; m < M; ++m) {
            d.incl.push_back({value(fields[5 + 2 * m]), value(fields[6 + 2 * m])});
        }
        d.iterations = static_cast<int>(parse_double(fields[5 + 2 * M], path));
        d.converged = fields[6 + 2 * M] == "1";
        d.final_elbo = value(fields[7 + 2 * M]);
        report.decisions.push_back(std::move(d));
    }
    if (columns.empty()) {
        throw DataError(path + ": missing column header");
    }
    return report;
}

} // namespace msvg
