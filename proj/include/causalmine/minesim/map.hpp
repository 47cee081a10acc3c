#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace causalmine::minesim {

struct MapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : MapError {
    using MapError::MapError;
};
struct MapValidationError : MapError {
    using MapError::MapError;
};

enum class Cell : char { Wall = '#', Free = '.', Home = 'H', Land = 'L', Vent = 'V' };

// Static grid geometry. Cell indices are y * width + x; (0,0) is the
// top-left character of the ASCII map.
struct MineMap {
    int width = 0;
    int height = 0;
    std::vector<Cell> cells;

    Cell at(int x, int y) const { return cells[y * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    bool wall(int x, int y) const { return !in_bounds(x, y) || at(x, y) == Cell::Wall; }
    bool landable(int x, int y) const { return at(x, y) == Cell::Home || at(x, y) == Cell::Land; }
    int index(int x, int y) const { return y * width + x; }

    std::vector<int> free_cells() const;      // non-wall cell indices
    std::vector<int> landable_cells() const;  // Home + Land cell indices
    int diagonal() const;                     // ceil of the Euclidean diagonal

    // Distance in cells to the first wall when moving along (dx, dy).
    int wall_distance(int x, int y, int dx, int dy) const;

    // BFS hop distance from every non-wall cell to the nearest landable cell
    // (4-connected, walls block). Unreachable cells get -1.
    std::vector<int> distance_to_landable() const;

    std::string emit() const;
};

// Parses {#,.,H,L,V}; lines starting with ';' are comments. Validates:
// rectangular, closed boundary, at least one Home cell.
MineMap load_map(const std::string& text);
MineMap load_map_file(const std::string& path);

}  // namespace causalmine::minesim
