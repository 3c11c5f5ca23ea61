# tasks module