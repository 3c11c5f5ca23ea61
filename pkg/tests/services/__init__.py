# tests services module