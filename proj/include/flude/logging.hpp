#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flude/metrics.hpp"
#include "flude/round_engine.hpp"

namespace flude {

namespace logdetail {

/// Fixed six-decimal formatting so log bytes are reproducible.
inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace logdetail

inline constexpr const char* kRoundLogHeader =
    "round,n_online,n_selected,n_distributed,n_resumed,n_uploaded,n_interrupted,"
    "duration_s,W,avg_staleness_H,epsilon,cum_download,cum_upload,train_loss,test_acc";

class RoundLogWriter {
public:
    RoundLogWriter() = default;

    void open(const std::string& path, bool append) {
        out_.open(path, append ? std::ios::app : std::ios::trunc);
        if (!out_) throw std::runtime_error("cannot open round log: " + path);
        if (!append) out_ << kRoundLogHeader << "\n";
        out_.flush();
    }

    void write(const RoundLogRow& r) {
        out_ << r.round << ',' << r.n_online << ',' << r.n_selected << ',' << r.n_distributed
             << ',' << r.n_resumed << ',' << r.n_uploaded << ',' << r.n_interrupted << ','
             << logdetail::fmt(r.duration_s) << ',' << logdetail::fmt(r.w) << ','
             << logdetail::fmt(r.avg_staleness) << ',' << logdetail::fmt(r.epsilon) << ','
             << r.cum_download << ',' << r.cum_upload << ',' << logdetail::fmt(r.train_loss)
             << ',' << logdetail::fmt(r.test_acc) << "\n";
        out_.flush();
    }

private:
    std::ofstream out_;
};

inline std::vector<RoundLogRow> read_round_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open round log: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty round log: " + path);
    std::vector<RoundLogRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 15) throw std::runtime_error("malformed round log row: " + line);
        RoundLogRow r;
        r.round = std::stoll(f[0]);
        r.n_online = std::stoi(f[1]);
        r.n_selected = std::stoi(f[2]);
        r.n_distributed = std::stoi(f[3]);
        r.n_resumed = std::stoi(f[4]);
        r.n_uploaded = std::stoi(f[5]);
        r.n_interrupted = std::stoi(f[6]);
        r.duration_s = std::stod(f[7]);
        r.w = std::stod(f[8]);
        r.avg_staleness = std::stod(f[9]);
        r.epsilon = std::stod(f[10]);
        r.cum_download = std::stoll(f[11]);
        r.cum_upload = std::stoll(f[12]);
        r.train_loss = std::stod(f[13]);
        r.test_acc = std::stod(f[14]);
        rows.push_back(r);
    }
    return rows;
}

class SelectionTraceWriter {
public:
    void open(const std::string& path, bool append) {
        out_.open(path, append ? std::ios::app : std::ios::trunc);
        if (!out_) throw std::runtime_error("cannot open selection trace: " + path);
        if (!append) out_ << "round,device_id,selected_via,priority\n";
        out_.flush();
    }

    void write(int64_t round, const std::vector<SelectionEntry>& entries) {
        for (const auto& e : entries)
            out_ << round << ',' << e.device_id << ',' << to_string(e.via) << ','
                 << logdetail::fmt(e.priority) << "\n";
        out_.flush();
    }

private:
    std::ofstream out_;
};

/// gnuplot-friendly convergence curve: round, accuracy, cumulative transfers.
class CurveWriter {
public:
    void open(const std::string& path, bool append) {
        out_.open(path, append ? std::ios::app : std::ios::trunc);
        if (!out_) throw std::runtime_error("cannot open curve file: " + path);
        if (!append) out_ << "round,accuracy,cum_comm\n";
        out_.flush();
    }

    void write(const RoundLogRow& r) {
        out_ << r.round << ',' << logdetail::fmt(r.test_acc) << ','
             << (r.cum_download + r.cum_upload) << "\n";
        out_.flush();
    }

private:
    std::ofstream out_;
};

inline void write_summary_csv(const std::string& path, const RunSummary& s) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open summary file: " + path);
    out << "target_accuracy,time_to_accuracy_s,final_accuracy,total_comm_units,rounds,"
           "gini_participation,per_class_accuracy\n";
    out << logdetail::fmt(s.target_accuracy) << ',';
    if (s.time_to_accuracy_s)
        out << logdetail::fmt(*s.time_to_accuracy_s);
    else
        out << "NA";
    out << ',' << logdetail::fmt(s.final_accuracy) << ',' << s.total_comm_units << ','
        << s.rounds << ',' << logdetail::fmt(s.gini_participation) << ',';
    for (size_t i = 0; i < s.per_class_accuracy.size(); ++i) {
        if (i) out << ';';
        out << logdetail::fmt(s.per_class_accuracy[i]);
    }
    out << "\n";
}

struct ComparisonRow {
    std::string variant;
    uint64_t seed = 0;
    RunSummary summary;
};

inline void write_comparison_csv(const std::string& path,
                                 const std::vector<ComparisonRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open comparison file: " + path);
    out << "variant,seed,final_accuracy,time_to_accuracy_s,total_comm_units,"
           "gini_participation\n";
    for (const auto& r : rows) {
        out << r.variant << ',' << r.seed << ',' << logdetail::fmt(r.summary.final_accuracy)
            << ',';
        if (r.summary.time_to_accuracy_s)
            out << logdetail::fmt(*r.summary.time_to_accuracy_s);
        else
            out << "NA";
        out << ',' << r.summary.total_comm_units << ','
            << logdetail::fmt(r.summary.gini_participation) << "\n";
    }
}

} // namespace flude
