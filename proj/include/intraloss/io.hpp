#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intraloss/common.hpp"
#include "intraloss/evaluation.hpp"
#include "intraloss/synthetic.hpp"
#include "intraloss/trainer.hpp"

namespace intraloss::io {

using json = nlohmann::ordered_json;

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest decimal form that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// --- dataset CSV: sample_id,label,split,x0..x{d-1} ---

inline void write_dataset_csv(const synthetic::LabeledDataset& ds, std::ostream& os) {
    os << "sample_id,label,split";
    for (Eigen::Index j = 0; j < ds.inputs.cols(); ++j) os << ",x" << j;
    os << "\n";
    for (Eigen::Index i = 0; i < ds.inputs.rows(); ++i) {
        os << i << ',' << ds.labels[i] << ','
           << (ds.split[i] == synthetic::Split::Train ? "train" : "test");
        for (Eigen::Index j = 0; j < ds.inputs.cols(); ++j)
            os << ',' << format_double(ds.inputs(i, j));
        os << "\n";
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

inline synthetic::LabeledDataset read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("dataset csv: missing header");
    const auto header = split_csv_line(line);
    if (header.size() < 4 || header[0] != "sample_id" || header[1] != "label" ||
        header[2] != "split")
        throw IoError("dataset csv: unexpected header");
    const int dim = static_cast<int>(header.size()) - 3;

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<synthetic::Split> splits;
    int max_label = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (static_cast<int>(f.size()) != dim + 3)
            throw IoError("dataset csv: bad field count on row " +
                          std::to_string(rows.size()));
        labels.push_back(std::stoi(f[1]));
        max_label = std::max(max_label, labels.back());
        if (f[2] == "train")
            splits.push_back(synthetic::Split::Train);
        else if (f[2] == "test")
            splits.push_back(synthetic::Split::Test);
        else
            throw IoError("dataset csv: unknown split tag '" + f[2] + "'");
        std::vector<double> x(dim);
        for (int j = 0; j < dim; ++j) x[j] = std::stod(f[3 + j]);
        rows.push_back(std::move(x));
    }

    synthetic::LabeledDataset ds;
    ds.inputs = Matrix(rows.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < dim; ++j) ds.inputs(i, j) = rows[i][j];
    ds.labels = std::move(labels);
    ds.split = std::move(splits);
    ds.num_classes = max_label + 1;
    return ds;
}

// --- trace CSV: iter,stage,loss_s,loss_intra,w_intra,mean_p,lr ---

inline void write_trace_csv(const trainer::TrainTrace& trace, std::ostream& os) {
    os << "iter,stage,loss_s,loss_intra,w_intra,mean_p,lr\n";
    for (const auto& r : trace)
        os << r.iteration << ',' << r.stage << ',' << format_double(r.loss_s) << ','
           << format_double(r.loss_intra) << ',' << format_double(r.w_intra) << ','
           << format_double(r.mean_p) << ',' << format_double(r.lr) << "\n";
}

// --- sphere dump CSV: sample_id,label,e0..,z,p,grad_softmax,grad_intra ---

inline void write_sphere_csv(const std::vector<evaluation::SphereDumpRow>& rows,
                             std::ostream& os) {
    const Eigen::Index dim = rows.empty() ? 0 : rows.front().embedding.size();
    os << "sample_id,label";
    for (Eigen::Index j = 0; j < dim; ++j) os << ",e" << j;
    os << ",z,p,grad_softmax,grad_intra\n";
    for (const auto& r : rows) {
        os << r.sample_id << ',' << r.label;
        for (Eigen::Index j = 0; j < dim; ++j) os << ',' << format_double(r.embedding(j));
        os << ',' << format_double(r.z) << ',' << format_double(r.p) << ','
           << format_double(r.grad_softmax) << ',' << format_double(r.grad_intra) << "\n";
    }
}

inline std::vector<evaluation::SphereDumpRow> read_sphere_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("sphere csv: missing header");
    const auto header = split_csv_line(line);
    const int dim = static_cast<int>(header.size()) - 6;
    std::vector<evaluation::SphereDumpRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        evaluation::SphereDumpRow r;
        r.sample_id = std::stoi(f[0]);
        r.label = std::stoi(f[1]);
        r.embedding = Vector(dim);
        for (int j = 0; j < dim; ++j) r.embedding(j) = std::stod(f[2 + j]);
        r.z = std::stod(f[2 + dim]);
        r.p = std::stod(f[3 + dim]);
        r.grad_softmax = std::stod(f[4 + dim]);
        r.grad_intra = std::stod(f[5 + dim]);
        rows.push_back(std::move(r));
    }
    return rows;
}

// --- distribution report as a JSON tree with stable key names ---

inline json report_to_json(const evaluation::DistributionReport& rep) {
    json j;
    j["per_class"] = json::array();
    for (const auto& cs : rep.per_class) {
        json c;
        c["label"] = cs.label;
        c["mean_direction"] = std::vector<double>(
            cs.mean_direction.data(), cs.mean_direction.data() + cs.mean_direction.size());
        c["angular_radius_p50_rad"] = cs.radius_p50;
        c["angular_radius_p95_rad"] = cs.radius_p95;
        c["anisotropy_index"] = cs.anisotropy_index;
        j["per_class"].push_back(std::move(c));
    }
    j["global"]["min_interclass_mean_angle_rad"] = rep.min_interclass_mean_angle;
    j["global"]["margin_proxy_rad"] = rep.margin_proxy;
    j["global"]["verification_accuracy"] = rep.verification_accuracy;
    j["global"]["best_threshold"] = rep.best_threshold;
    return j;
}

// --- model parameters as JSON ---

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json model_to_json(const trainer::Backbone& backbone, const Matrix& class_weights) {
    json j;
    j["backbone"] =
        backbone.kind == trainer::BackboneKind::LookupTable ? "lookup_table" : "mlp";
    j["embed_dim"] = backbone.embed_dim;
    if (backbone.kind == trainer::BackboneKind::LookupTable) {
        j["table"] = matrix_to_json(backbone.table);
    } else {
        j["input_dim"] = backbone.input_dim;
        j["hidden_dim"] = backbone.hidden_dim;
        j["w1"] = matrix_to_json(backbone.w1);
        j["b1"] = matrix_to_json(backbone.b1);
        j["w2"] = matrix_to_json(backbone.w2);
    }
    j["class_weights"] = matrix_to_json(class_weights);
    return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << content;
    if (!os) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace intraloss::io
