#include "verloc/common.hpp"

#include <cstdlib>

namespace verloc {

std::filesystem::path find_data_file(const std::string& name) {
    namespace fs = std::filesystem;
    if (const char* env = std::getenv("VERLOC_DATA_DIR")) {
        fs::path p = fs::path(env) / name;
        if (fs::exists(p)) return p;
    }
    fs::path dir = fs::current_path();
    for (int depth = 0; depth < 4; ++depth) {
        fs::path p = dir / "data" / name;
        if (fs::exists(p)) return p;
        if (!dir.has_parent_path() || dir.parent_path() == dir) break;
        dir = dir.parent_path();
    }
#ifdef VERLOC_SOURCE_DATA_DIR
    {
        fs::path p = fs::path(VERLOC_SOURCE_DATA_DIR) / name;
        if (fs::exists(p)) return p;
    }
#endif
    throw std::runtime_error("data file not found: " + name);
}

} // namespace verloc
