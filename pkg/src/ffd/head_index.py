"""Column <-> (tile, slot) indexing of the query matrix.

Columns are tile-major: the N_g slots of tile (0, 0) come first, then tile
(0, 1), and so on row by row.
"""


def query_count(grid_shape, n_g):
    rows, cols = grid_shape
    return rows * cols * n_g


def query_index_to_tile(index, grid_shape, n_g):
    """Column index -> (tile_row, tile_col, slot)."""
    rows, cols = grid_shape
    if not 0 <= index < rows * cols * n_g:
        raise IndexError(f"query index {index} outside [0, {rows * cols * n_g})")
    tile, slot = divmod(int(index), n_g)
    tile_row, tile_col = divmod(tile, cols)
    return tile_row, tile_col, slot


def tile_to_query_index(tile_row, tile_col, slot, grid_shape, n_g):
    rows, cols = grid_shape
    if not (0 <= tile_row < rows and 0 <= tile_col < cols and 0 <= slot < n_g):
        raise IndexError(f"tile ({tile_row}, {tile_col}) slot {slot} outside the grid")
    return (tile_row * cols + tile_col) * n_g + slot
