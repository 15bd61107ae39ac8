"""Share-network analysis of petitions: bipartite projection with NPMI edge
weights, Louvain communities, PageRank centrality and the accompanying
statistics."""

__version__ = "0.1.0"
