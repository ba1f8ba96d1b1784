#include "qotl/json_io.hpp"

namespace qotl {

nlohmann::json mat_to_json(const Mat& m) {
    nlohmann::json data = nlohmann::json::array();
    for (const auto& v : m.a) data.push_back({v.real(), v.imag()});
    return {{"rows", m.rows}, {"cols", m.cols}, {"data", std::move(data)}};
}

Mat mat_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
        throw std::invalid_argument("matrix json: expected {rows, cols, data}");
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    const auto& data = j.at("data");
    if (!data.is_array() || static_cast<int>(data.size()) != rows * cols)
        throw std::invalid_argument("matrix json: data length must equal rows*cols");
    Mat m(rows, cols);
    for (size_t i = 0; i < data.size(); ++i) {
        const auto& e = data[i];
        if (!e.is_array() || e.size() != 2)
            throw std::invalid_argument("matrix json: entries must be [re, im] pairs");
        m.a[i] = cx(e[0].get<double>(), e[1].get<double>());
    }
    return m;
}

}  // namespace qotl
