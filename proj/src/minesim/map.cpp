#include "causalmine/minesim/map.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

namespace causalmine::minesim {

std::vector<int> MineMap::free_cells() const {
    std::vector<int> out;
    for (int i = 0; i < width * height; ++i)
        if (cells[i] != Cell::Wall) out.push_back(i);
    return out;
}

std::vector<int> MineMap::landable_cells() const {
    std::vector<int> out;
    for (int i = 0; i < width * height; ++i)
        if (cells[i] == Cell::Home || cells[i] == Cell::Land) out.push_back(i);
    return out;
}

int MineMap::diagonal() const {
    return static_cast<int>(std::ceil(std::sqrt(double(width) * width + double(height) * height)));
}

int MineMap::wall_distance(int x, int y, int dx, int dy) const {
    int d = 0;
    while (!wall(x + (d + 1) * dx, y + (d + 1) * dy)) ++d;
    return d + 1;  // steps until the wall cell itself
}

std::vector<int> MineMap::distance_to_landable() const {
    std::vector<int> dist(width * height, -1);
    std::deque<int> queue;
    for (int i : landable_cells()) {
        dist[i] = 0;
        queue.push_back(i);
    }
    const int dx[] = {1, -1, 0, 0};
    const int dy[] = {0, 0, 1, -1};
    while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        const int cx = cur % width, cy = cur / width;
        for (int k = 0; k < 4; ++k) {
            const int nx = cx + dx[k], ny = cy + dy[k];
            if (wall(nx, ny)) continue;
            const int ni = index(nx, ny);
            if (dist[ni] < 0) {
                dist[ni] = dist[cur] + 1;
                queue.push_back(ni);
            }
        }
    }
    return dist;
}

std::string MineMap::emit() const {
    std::string out;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) out.push_back(static_cast<char>(at(x, y)));
        out.push_back('\n');
    }
    return out;
}

MineMap load_map(const std::string& text) {
    MineMap m;
    std::istringstream in(text);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == ';') continue;
        if (m.width == 0) m.width = static_cast<int>(line.size());
        if (static_cast<int>(line.size()) != m.width)
            throw ParseError("ragged row at line " + std::to_string(row + 1));
        for (int col = 0; col < m.width; ++col) {
            switch (line[col]) {
                case '#': m.cells.push_back(Cell::Wall); break;
                case '.': m.cells.push_back(Cell::Free); break;
                case 'H': m.cells.push_back(Cell::Home); break;
                case 'L': m.cells.push_back(Cell::Land); break;
                case 'V': m.cells.push_back(Cell::Vent); break;
                default:
                    throw ParseError("bad character '" + std::string(1, line[col]) + "' at row " +
                                     std::to_string(row + 1) + " col " + std::to_string(col + 1));
            }
        }
        ++row;
    }
    m.height = row;
    if (m.width < 3 || m.height < 3) throw MapValidationError("map must be at least 3x3");
    for (int x = 0; x < m.width; ++x)
        if (m.at(x, 0) != Cell::Wall || m.at(x, m.height - 1) != Cell::Wall)
            throw MapValidationError("open boundary: row 0 or last row not all walls");
    for (int y = 0; y < m.height; ++y)
        if (m.at(0, y) != Cell::Wall || m.at(m.width - 1, y) != Cell::Wall)
            throw MapValidationError("open boundary: column 0 or last column not all walls");
    bool has_home = false;
    for (Cell c : m.cells) has_home = has_home || c == Cell::Home;
    if (!has_home) throw MapValidationError("map has no Home cell");
    return m;
}

MineMap load_map_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MapError("cannot open map file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_map(buf.str());
}

}  // namespace causalmine::minesim
