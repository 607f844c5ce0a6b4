"""qdrive テストスイート"""
