# tests module