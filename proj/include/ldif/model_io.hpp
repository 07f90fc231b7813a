#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "ldif/common.hpp"
#include "ldif/model.hpp"

namespace ldif {

namespace detail {

inline void append_real(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

inline void append_layer(std::string& out, const Linear& l) {
    bool first = true;
    auto put = [&](double v) {
        if (!first) out += ' ';
        append_real(out, v);
        first = false;
    };
    for (int r = 0; r < l.weight.rows(); ++r)
        for (int c = 0; c < l.weight.cols(); ++c) put(l.weight(r, c));
    for (int r = 0; r < l.bias.size(); ++r) put(l.bias[r]);
    out += '\n';
}

inline Linear parse_layer(const std::string& line, int out_dim, int in_dim, const char* what) {
    Linear l = Linear::zeros(out_dim, in_dim);
    std::istringstream ss(line);
    for (int r = 0; r < out_dim; ++r)
        for (int c = 0; c < in_dim; ++c)
            if (!(ss >> l.weight(r, c))) throw IoError(std::string("model file: truncated ") + what + " weights");
    for (int r = 0; r < out_dim; ++r)
        if (!(ss >> l.bias[r])) throw IoError(std::string("model file: truncated ") + what + " bias");
    double extra;
    if (ss >> extra) throw IoError(std::string("model file: trailing values in ") + what + " line");
    return l;
}

}  // namespace detail

// Text model format, versioned:
//   LDIF 1 <N> <M> <sym_count> <sym_axis>
//   N lines of 10 analytic parameters: c p1 p2 p3 r1 r2 r3 e1 e2 e3
//   N lines of M latents
//   DECODER <H> <M>
//   10 layer lines (weights row-major, then bias) in the order:
//   input, cbn1-gamma, cbn1-beta, res-W1, cbn2-gamma, cbn2-beta, res-W2,
//   cbn3-gamma, cbn3-beta, output
// All reals carry 17 significant digits so that save/load round-trips
// exactly.
inline std::string serialize_model(const LdifModel& model) {
    model.validate();
    std::string out;
    out.reserve(1024 + static_cast<size_t>(model.n_elements) * (model.latent_dim + 10) * 26);
    out += "LDIF 1 " + std::to_string(model.n_elements) + ' ' + std::to_string(model.latent_dim) + ' ' +
           std::to_string(model.sym_count) + ' ' + std::to_string(model.sym_axis) + '\n';
    for (const ElementParams& e : model.elements) {
        detail::append_real(out, e.scale_c);
        for (int a = 0; a < 3; ++a) { out += ' '; detail::append_real(out, e.center_p[a]); }
        for (int a = 0; a < 3; ++a) { out += ' '; detail::append_real(out, e.radii_r[a]); }
        for (int a = 0; a < 3; ++a) { out += ' '; detail::append_real(out, e.euler_e[a]); }
        out += '\n';
    }
    for (const VecX& z : model.latents) {
        for (int k = 0; k < z.size(); ++k) {
            if (k) out += ' ';
            detail::append_real(out, z[k]);
        }
        out += '\n';
    }
    out += "DECODER " + std::to_string(model.decoder.hidden) + ' ' + std::to_string(model.decoder.latent) + '\n';
    const DecoderWeights& w = model.decoder;
    detail::append_layer(out, w.input);
    detail::append_layer(out, w.cbn_gamma[0]);
    detail::append_layer(out, w.cbn_beta[0]);
    detail::append_layer(out, w.res1);
    detail::append_layer(out, w.cbn_gamma[1]);
    detail::append_layer(out, w.cbn_beta[1]);
    detail::append_layer(out, w.res2);
    detail::append_layer(out, w.cbn_gamma[2]);
    detail::append_layer(out, w.cbn_beta[2]);
    detail::append_layer(out, w.output);
    return out;
}

inline LdifModel parse_model(std::istream& in) {
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) throw IoError(std::string("model file: missing ") + what);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    LdifModel model;
    {
        std::istringstream ss(next_line("header"));
        std::string magic;
        int version = 0;
        if (!(ss >> magic >> version >> model.n_elements >> model.latent_dim >> model.sym_count >> model.sym_axis) ||
            magic != "LDIF")
            throw IoError("model file: bad header (expect 'LDIF 1 N M sym_count sym_axis')");
        if (version != 1) throw IoError("model file: unsupported version " + std::to_string(version));
        if (model.n_elements < 0 || model.latent_dim < 0) throw IoError("model file: negative dimensions");
    }
    for (int i = 0; i < model.n_elements; ++i) {
        std::istringstream ss(next_line("element line"));
        ElementParams e;
        if (!(ss >> e.scale_c >> e.center_p[0] >> e.center_p[1] >> e.center_p[2] >> e.radii_r[0] >> e.radii_r[1] >>
              e.radii_r[2] >> e.euler_e[0] >> e.euler_e[1] >> e.euler_e[2]))
            throw IoError("model file: malformed element line " + std::to_string(i));
        model.elements.push_back(e);
    }
    for (int i = 0; i < model.n_elements; ++i) {
        std::istringstream ss(next_line("latent line"));
        VecX z(model.latent_dim);
        for (int k = 0; k < model.latent_dim; ++k)
            if (!(ss >> z[k])) throw IoError("model file: malformed latent line " + std::to_string(i));
        model.latents.push_back(z);
    }
    int hidden = 0, latent = 0;
    {
        std::istringstream ss(next_line("DECODER header"));
        std::string magic;
        if (!(ss >> magic >> hidden >> latent) || magic != "DECODER")
            throw IoError("model file: bad decoder header (expect 'DECODER H M')");
        if (latent != model.latent_dim) throw IoError("model file: decoder latent width != model latent_dim");
        if (hidden < 1) throw IoError("model file: decoder hidden width must be >= 1");
    }
    DecoderWeights w = DecoderWeights::zeros(hidden, latent);
    w.input = detail::parse_layer(next_line("input layer"), hidden, 3, "input");
    w.cbn_gamma[0] = detail::parse_layer(next_line("cbn1 gamma"), hidden, latent, "cbn1 gamma");
    w.cbn_beta[0] = detail::parse_layer(next_line("cbn1 beta"), hidden, latent, "cbn1 beta");
    w.res1 = detail::parse_layer(next_line("res W1"), hidden, hidden, "res W1");
    w.cbn_gamma[1] = detail::parse_layer(next_line("cbn2 gamma"), hidden, latent, "cbn2 gamma");
    w.cbn_beta[1] = detail::parse_layer(next_line("cbn2 beta"), hidden, latent, "cbn2 beta");
    w.res2 = detail::parse_layer(next_line("res W2"), hidden, hidden, "res W2");
    w.cbn_gamma[2] = detail::parse_layer(next_line("cbn3 gamma"), hidden, latent, "cbn3 gamma");
    w.cbn_beta[2] = detail::parse_layer(next_line("cbn3 beta"), hidden, latent, "cbn3 beta");
    w.output = detail::parse_layer(next_line("output layer"), 1, hidden, "output");
    model.decoder = w;
    model.validate();
    return model;
}

inline void save_model(const std::string& path, const LdifModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open model file for writing: " + path);
    out << serialize_model(model);
    if (!out) throw IoError("failed writing model file: " + path);
}

inline LdifModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);
    return parse_model(in);
}

}  // namespace ldif
