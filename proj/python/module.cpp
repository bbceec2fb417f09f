#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstring>

#include "jgn/trainer.hpp"

namespace py = pybind11;
using namespace jgn;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I32 = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

Block to_block(const F64& a) {
    if (a.size() != 64) throw py::value_error("expected an 8x8 block");
    Block b;
    std::copy_n(a.data(), 64, b.begin());
    return b;
}

py::array_t<double> from_block(const Block& b) {
    py::array_t<double> out({8, 8});
    std::copy(b.begin(), b.end(), out.mutable_data());
    return out;
}

QuantTable table_from(const py::object& qf_or_table) {
    if (py::isinstance<py::int_>(qf_or_table)) return quant_table(qf_or_table.cast<int>());
    auto a = qf_or_table.cast<py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>>();
    if (a.size() != 64) throw py::value_error("quantization table must have 64 entries");
    QuantTable t;
    std::copy_n(a.data(), 64, t.q.begin());
    return t;
}

py::array_t<std::uint16_t> table_array(const QuantTable& t) {
    py::array_t<std::uint16_t> out({8, 8});
    std::copy(t.q.begin(), t.q.end(), out.mutable_data());
    return out;
}

// coefficients as [block_rows, block_cols, 8, 8]
py::array_t<std::int32_t> grid_array(const CoefficientGrid& g) {
    py::array_t<std::int32_t> out({g.block_rows(), g.block_cols(), std::size_t(8), std::size_t(8)});
    std::copy(g.raw().begin(), g.raw().end(), out.mutable_data());
    return out;
}

CoefficientGrid grid_from(const I32& a, const QuantTable& t) {
    if (a.ndim() != 4 || a.shape(2) != 8 || a.shape(3) != 8)
        throw py::value_error("coefficients must have shape (block_rows, block_cols, 8, 8)");
    CoefficientGrid g(a.shape(0) * 8, a.shape(1) * 8, t);
    std::copy_n(a.data(), g.raw().size(), g.raw().begin());
    return g;
}

py::array_t<double> plane_array(const LuminancePlane& p) {
    py::array_t<double> out({p.h, p.w});
    std::copy(p.f.begin(), p.f.end(), out.mutable_data());
    return out;
}

LuminancePlane plane_from(const F64& a) {
    if (a.ndim() != 2) throw py::value_error("plane must be 2-D");
    LuminancePlane p;
    p.h = a.shape(0);
    p.w = a.shape(1);
    p.f.assign(a.data(), a.data() + a.size());
    return p;
}

py::dict report_dict(const EvalReport& r) {
    py::dict d;
    d["p_e"] = r.p_e;
    d["p_fa"] = r.p_fa;
    d["p_md"] = r.p_md;
    d["accuracy"] = r.accuracy;
    d["threshold"] = r.threshold_at_min;
    return d;
}

class Detector {
public:
    Detector(const std::filesystem::path& checkpoint, std::size_t h, std::size_t w, double threshold) {
        const auto ckpt = load_checkpoint(checkpoint);
        NetworkConfig nc;
        nc.height = h;
        nc.width = w;
        nc.preprocess.threshold = threshold;
        const bool sfe =
            std::ranges::any_of(ckpt.entries, [](const auto& e) { return e.name.starts_with("sfe1."); });
        const bool gal = std::ranges::any_of(ckpt.entries, [](const auto& e) { return e.name.starts_with("gal."); });
        nc.ablation = sfe ? (gal ? Ablation::full : Ablation::no_gal) : (gal ? Ablation::no_sfe : Ablation::neither);
        net_ = std::make_unique<Network<float>>(nc);
        apply_checkpoint(ckpt, net_->params());
    }

    // planes: [N,h,w] decompressed luminance -> p_stego per plane
    py::array_t<double> predict(const F64& planes) {
        if (planes.ndim() != 3) throw py::value_error("planes must have shape (N, h, w)");
        const auto& cfg = net_->config();
        if (std::size_t(planes.shape(1)) != cfg.height || std::size_t(planes.shape(2)) != cfg.width)
            throw py::value_error("plane size differs from the detector's input size");
        const std::size_t n = planes.shape(0), hw = cfg.height * cfg.width;
        std::vector<float> values(planes.data(), planes.data() + n * hw);
        py::array_t<double> out(n);
        {
            py::gil_scoped_release release;
            const auto p = net_->probabilities(Tensor<float>({n, 1, cfg.height, cfg.width}, std::move(values)), false);
            auto* o = out.mutable_data();
            for (std::size_t i = 0; i < n; ++i) o[i] = p.data()[2 * i + 1];
        }
        return out;
    }

    std::string ablation() const { return to_string(net_->config().ablation); }

private:
    std::unique_ptr<Network<float>> net_;
};

}  // namespace

PYBIND11_MODULE(_jgn, m) {
    m.doc() = "JPEG-domain steganalysis detector: DCT helpers, corpora, P_E and inference";

    m.def("quant_table", [](int qf) { return table_array(quant_table(qf)); }, py::arg("qf"));
    m.def("block_dct", [](const F64& b) { return from_block(block_dct(to_block(b))); });
    m.def("block_idct", [](const F64& b) { return from_block(block_idct(to_block(b))); });
    m.def(
        "decompress",
        [](const I32& coeffs, const py::object& qf) { return plane_array(decompress(grid_from(coeffs, table_from(qf)))); },
        py::arg("coeffs"), py::arg("qf_or_table"));
    m.def(
        "compress",
        [](const F64& plane, const py::object& qf) { return grid_array(compress(plane_from(plane), table_from(qf))); },
        py::arg("plane"), py::arg("qf_or_table"));
    m.def(
        "count_nzac", [](const I32& coeffs) { return count_nzac(grid_from(coeffs, quant_table(75))); },
        py::arg("coeffs"));
    m.def(
        "embed_toy",
        [](const I32& coeffs, double rate, std::uint64_t seed) {
            Rng rng(seed);
            return grid_array(embed_toy(grid_from(coeffs, quant_table(75)), rate, rng));
        },
        py::arg("coeffs"), py::arg("rate"), py::arg("seed") = 0);

    m.def(
        "evaluate_pe",
        [](const F64& cover, const F64& stego) {
            return report_dict(evaluate_pe(std::span<const double>(cover.data(), cover.size()),
                                           std::span<const double>(stego.data(), stego.size())));
        },
        py::arg("cover_scores"), py::arg("stego_scores"));

    m.def("srm_bank", [] {
        const auto bank = srm_bank_init();
        const auto w = bank.weights();
        py::array_t<double> k({std::size_t(kResidualChannels), std::size_t(5), std::size_t(5)});
        std::copy(w.begin(), w.end(), k.mutable_data());
        return py::make_tuple(k, std::vector<std::string>(bank.names.begin(), bank.names.end()));
    });

    m.def(
        "fold_to_blocks",
        [](const F64& map) {
            if (map.ndim() != 2) throw py::value_error("map must be 2-D");
            const auto nodes = fold_to_blocks(Tensor<double>({std::size_t(map.shape(0)), std::size_t(map.shape(1))},
                                                             {map.data(), map.data() + map.size()}));
            py::array_t<double> out({nodes.dim(0), nodes.dim(1)});
            std::copy(nodes.data().begin(), nodes.data().end(), out.mutable_data());
            return out;
        },
        py::arg("map"));
    m.def(
        "unfold_from_blocks",
        [](const F64& nodes, std::size_t h, std::size_t w) {
            if (nodes.ndim() != 2) throw py::value_error("nodes must be 2-D");
            const auto map =
                unfold_from_blocks(Tensor<double>({std::size_t(nodes.shape(0)), std::size_t(nodes.shape(1))},
                                                  {nodes.data(), nodes.data() + nodes.size()}),
                                   h, w);
            py::array_t<double> out({h, w});
            std::copy(map.data().begin(), map.data().end(), out.mutable_data());
            return out;
        },
        py::arg("nodes"), py::arg("h"), py::arg("w"));

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("h", &Dataset::h)
        .def_readonly("w", &Dataset::w)
        .def_property_readonly("table", [](const Dataset& d) { return table_array(d.table); })
        .def("__len__", [](const Dataset& d) { return d.pairs.size(); })
        .def("cover", [](const Dataset& d, std::size_t k) { return grid_array(d.pairs.at(k).cover); })
        .def("stego", [](const Dataset& d, std::size_t k) { return grid_array(d.pairs.at(k).stego); })
        .def("planes", [](const Dataset& d) {
            const auto planes = decompress_pairs(d);
            py::array_t<double> out({planes.size(), d.h, d.w});
            auto* o = out.mutable_data();
            for (const auto& p : planes) o = std::copy(p.f.begin(), p.f.end(), o);
            return out;
        }, "decompressed planes ordered cover0, stego0, cover1, ...")
        .def("save", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); });

    m.def(
        "synthesize",
        [](std::size_t pairs, double rate, int qf, std::size_t size, std::uint64_t seed) {
            SynthOptions o;
            o.pairs = pairs;
            o.rate = rate;
            o.qf = qf;
            o.size = size;
            o.seed = seed;
            return synthesize(o);
        },
        py::arg("pairs") = 8, py::arg("rate") = 0.5, py::arg("qf") = 75, py::arg("size") = 64, py::arg("seed") = 0);
    m.def("load_dataset", [](const std::filesystem::path& p) { return load_dataset(p); });

    py::class_<Detector>(m, "Detector")
        .def(py::init<const std::filesystem::path&, std::size_t, std::size_t, double>(), py::arg("checkpoint"),
             py::arg("h") = 64, py::arg("w") = 64, py::arg("threshold") = 3.0)
        .def("predict", &Detector::predict, py::arg("planes"))
        .def_property_readonly("ablation", &Detector::ablation);

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
}
